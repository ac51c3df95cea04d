use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Gradient lattice noise over R^3.
///
/// Classic construction: a seeded permutation hashes each integer lattice
/// point to one of twelve edge gradients; contributions are blended with
/// the quintic fade `6t^5 - 15t^4 + 10t^3`. The value is exactly zero at
/// every integer lattice point and stays well inside `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct PerlinField {
    perm: [u8; 512],
}

const GRADS: [[f64; 3]; 12] = [
    [1.0, 1.0, 0.0],
    [-1.0, 1.0, 0.0],
    [1.0, -1.0, 0.0],
    [-1.0, -1.0, 0.0],
    [1.0, 0.0, 1.0],
    [-1.0, 0.0, 1.0],
    [1.0, 0.0, -1.0],
    [-1.0, 0.0, -1.0],
    [0.0, 1.0, 1.0],
    [0.0, -1.0, 1.0],
    [0.0, 1.0, -1.0],
    [0.0, -1.0, -1.0],
];

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

impl PerlinField {
    pub fn new(seed: u64) -> Self {
        let mut table: [u8; 256] = std::array::from_fn(|i| i as u8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        table.shuffle(&mut rng);
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = table[i & 255];
        }
        PerlinField { perm }
    }

    fn grad(&self, xi: i64, yi: i64, zi: i64) -> &[f64; 3] {
        let x = (xi & 255) as usize;
        let y = (yi & 255) as usize;
        let z = (zi & 255) as usize;
        let h = self.perm[self.perm[self.perm[x] as usize + y] as usize + z] as usize;
        &GRADS[h % 12]
    }

    pub fn sample(&self, p: &Vector3<f64>) -> f64 {
        let x0 = p.x.floor();
        let y0 = p.y.floor();
        let z0 = p.z.floor();
        let (xi, yi, zi) = (x0 as i64, y0 as i64, z0 as i64);
        let (fx, fy, fz) = (p.x - x0, p.y - y0, p.z - z0);
        let (u, v, w) = (fade(fx), fade(fy), fade(fz));

        let dot = |gx: i64, gy: i64, gz: i64, dx: f64, dy: f64, dz: f64| {
            let g = self.grad(xi + gx, yi + gy, zi + gz);
            g[0] * dx + g[1] * dy + g[2] * dz
        };

        let c000 = dot(0, 0, 0, fx, fy, fz);
        let c100 = dot(1, 0, 0, fx - 1.0, fy, fz);
        let c010 = dot(0, 1, 0, fx, fy - 1.0, fz);
        let c110 = dot(1, 1, 0, fx - 1.0, fy - 1.0, fz);
        let c001 = dot(0, 0, 1, fx, fy, fz - 1.0);
        let c101 = dot(1, 0, 1, fx - 1.0, fy, fz - 1.0);
        let c011 = dot(0, 1, 1, fx, fy - 1.0, fz - 1.0);
        let c111 = dot(1, 1, 1, fx - 1.0, fy - 1.0, fz - 1.0);

        let x00 = lerp(c000, c100, u);
        let x10 = lerp(c010, c110, u);
        let x01 = lerp(c001, c101, u);
        let x11 = lerp(c011, c111, u);
        let y0v = lerp(x00, x10, v);
        let y1v = lerp(x01, x11, v);
        lerp(y0v, y1v, w)
    }
}

/// One-shot sample of the seeded noise field at `p`.
pub fn perlin3(p: &Vector3<f64>, seed: u64) -> f64 {
    PerlinField::new(seed).sample(p)
}
