//! Fixed-capacity lattice points.
//!
//! Dimensions up to `MAX_D` are supported; unused trailing coordinates stay zero,
//! so points can be compared and hashed without carrying `d` around.

pub const MAX_D: usize = 8;

pub type Point = [i32; MAX_D];

pub fn from_slice(v: &[i32]) -> Point {
    let mut p = [0; MAX_D];
    p[..v.len()].copy_from_slice(v);
    p
}

pub fn add(a: &Point, b: &Point) -> Point {
    let mut p = *a;
    for i in 0..MAX_D {
        p[i] += b[i];
    }
    p
}

pub fn sub(a: &Point, b: &Point) -> Point {
    let mut p = *a;
    for i in 0..MAX_D {
        p[i] -= b[i];
    }
    p
}

pub fn norm2(p: &Point) -> f64 {
    p.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
}

pub fn sup_norm(p: &Point) -> i32 {
    p.iter().map(|c| c.abs()).max().unwrap_or(0)
}

pub fn axis(d: usize, i: usize, len: i32) -> Point {
    debug_assert!(i < d);
    let mut p = [0; MAX_D];
    p[i] = len;
    p
}

/// Packs coordinates into a single hash key. Coordinates must fit in i16.
pub fn key(p: &Point) -> u128 {
    let mut k = 0u128;
    for &c in p.iter() {
        k = (k << 16) | ((c as i16 as u16) as u128);
    }
    k
}

pub fn to_vec(p: &Point, d: usize) -> Vec<i32> {
    p[..d].to_vec()
}
