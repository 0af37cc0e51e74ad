//! Physicists' Hermite polynomials on the complex plane.

use num_complex::Complex64;

/// `H_n(z)` by the three-term recurrence `H_{k+1} = 2z·H_k − 2k·H_{k−1}`.
pub fn hermite(n: u32, z: Complex64) -> Complex64 {
    hermite_pair(n, z).0
}

/// Returns `(H_n(z), H_{n−1}(z))`; the second entry is zero for `n = 0`.
///
/// `H_n'(z) = 2n·H_{n−1}(z)`, so the pair is all the velocity field needs.
pub fn hermite_pair(n: u32, z: Complex64) -> (Complex64, Complex64) {
    let mut prev = Complex64::new(0.0, 0.0);
    let mut cur = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let next = 2.0 * z * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `H_n'(z)`.
pub fn hermite_derivative(n: u32, z: Complex64) -> Complex64 {
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    2.0 * n as f64 * hermite_pair(n, z).1
}

/// Real-line evaluation of `(H_n(x), H_{n−1}(x))`.
pub fn hermite_pair_real(n: u32, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Monomial coefficients of `H_n`, lowest degree first.
pub fn coefficients(n: u32) -> Vec<f64> {
    let mut prev: Vec<f64> = Vec::new();
    let mut cur = vec![1.0];
    for k in 0..n as usize {
        let mut next = vec![0.0; k + 2];
        for (j, c) in cur.iter().enumerate() {
            next[j + 1] += 2.0 * c;
        }
        for (j, c) in prev.iter().enumerate() {
            next[j] -= 2.0 * k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// The `n` real roots of `H_n`, ascending.
///
/// Sign changes are bracketed on a uniform grid that covers the oscillation region
/// and then bisected to full precision, with a final Newton polish.
pub fn real_roots(n: u32) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    // All roots satisfy |x| < sqrt(2n + 1).
    let bound = (2.0 * n as f64 + 1.0).sqrt() + 0.5;
    let cells = 400 * n as usize;
    let h = 2.0 * bound / cells as f64;
    let f = |x: f64| hermite_pair_real(n, x).0;
    let mut roots = Vec::with_capacity(n as usize);
    let mut a = -bound;
    let mut fa = f(a);
    for i in 1..=cells {
        let b = -bound + i as f64 * h;
        let fb = f(b);
        if fb == 0.0 {
            roots.push(b);
        } else if fa * fb < 0.0 {
            roots.push(bisect(&f, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    for r in roots.iter_mut() {
        let (hn, hm) = hermite_pair_real(n, *r);
        let d = 2.0 * n as f64 * hm;
        if d != 0.0 {
            let step = hn / d;
            if step.abs() < 1e-10 {
                *r -= step;
            }
        }
        // The middle root of an odd-degree polynomial is exactly zero.
        if r.abs() < 1e-14 {
            *r = 0.0;
        }
    }
    roots
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}
