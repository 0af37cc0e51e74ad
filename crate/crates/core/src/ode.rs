//! Dormand–Prince 5(4) stepper for autonomous systems on `[f64; N]`.
//!
//! The stepper separates proposing an error-controlled step from committing it,
//! so callers can veto a step (winding-angle caps, event handling) and can
//! re-evaluate partial steps from the current state when refining events.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// An accepted-by-error-control step that has not been committed yet.
#[derive(Debug, Clone)]
pub struct Proposal<const N: usize> {
    pub h: f64,
    pub y: [f64; N],
    dy: [f64; N],
    next_h: f64,
}

/// Failure of the stepper itself.
#[derive(Debug, Clone)]
pub enum StepFailure<E> {
    /// The field refused every step down to the minimum step size.
    Field { error: E, t: f64 },
    /// Error control demanded a step below the minimum.
    StepTooSmall { t: f64 },
}

pub struct Dopri5<const N: usize, F> {
    field: F,
    ctl: StepControl,
    t: f64,
    y: [f64; N],
    dy: [f64; N],
    h: f64,
    accepted: usize,
    rejected: usize,
}

impl<const N: usize, E, F> Dopri5<N, F>
where
    F: Fn(&[f64; N]) -> Result<[f64; N], E>,
{
    pub fn new(field: F, y0: [f64; N], ctl: StepControl) -> Result<Self, E> {
        let dy = field(&y0)?;
        let mut s = Self { field, ctl, t: 0.0, y: y0, dy, h: 0.0, accepted: 0, rejected: 0 };
        s.h = s.initial_step();
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn derivative(&self) -> &[f64; N] {
        &self.dy
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    pub fn limit_next_step(&mut self, h: f64) {
        self.h = self.h.min(h).max(self.ctl.min_step);
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.ctl.abs_tol + self.ctl.rel_tol * a.abs().max(b.abs())
    }

    fn initial_step(&self) -> f64 {
        let norm = |v: &[f64; N]| {
            (v.iter().zip(&self.y).map(|(x, y)| (x / self.scale(*y, *y)).powi(2)).sum::<f64>() / N as f64).sqrt()
        };
        let d0 = norm(&self.y);
        let d1 = norm(&self.dy);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.ctl.max_step);
        let mut y1 = self.y;
        for i in 0..N {
            y1[i] += h0 * self.dy[i];
        }
        let h1 = match (self.field)(&y1) {
            Ok(f1) => {
                let mut diff = [0.0; N];
                for i in 0..N {
                    diff[i] = f1[i] - self.dy[i];
                }
                let d2 = norm(&diff) / h0;
                let m = d1.max(d2);
                if m <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / m).powf(0.2) }
            }
            Err(_) => h0 * 0.1,
        };
        (100.0 * h0).min(h1).min(self.ctl.max_step).max(self.ctl.min_step)
    }

    /// Stages of one step of size `h` from the current state; returns the
    /// 5th-order solution, its derivative (FSAL) and the weighted error norm.
    fn attempt(&self, h: f64) -> Result<([f64; N], [f64; N], f64), E> {
        let f = &self.field;
        let y = &self.y;
        let k1 = &self.dy;
        let mut tmp = [0.0; N];

        let comb = |tmp: &mut [f64; N], parts: &[(f64, &[f64; N])]| {
            for i in 0..N {
                let mut s = 0.0;
                for (c, k) in parts {
                    s += c * k[i];
                }
                tmp[i] = y[i] + h * s;
            }
        };

        comb(&mut tmp, &[(A21, k1)]);
        let k2 = f(&tmp)?;
        comb(&mut tmp, &[(A31, k1), (A32, &k2)]);
        let k3 = f(&tmp)?;
        comb(&mut tmp, &[(A41, k1), (A42, &k2), (A43, &k3)]);
        let k4 = f(&tmp)?;
        comb(&mut tmp, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k5 = f(&tmp)?;
        comb(&mut tmp, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let k6 = f(&tmp)?;
        let mut y_new = [0.0; N];
        comb(&mut y_new, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(&y_new)?;

        let mut acc = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            acc += (e / self.scale(y[i], y_new[i])).powi(2);
        }
        Ok((y_new, k7, (acc / N as f64).sqrt()))
    }

    /// Searches for the next step that satisfies the error tolerance.
    pub fn propose(&mut self) -> Result<Proposal<N>, StepFailure<E>> {
        let mut h = self.h.min(self.ctl.max_step);
        loop {
            match self.attempt(h) {
                Ok((y, dy, err)) if err.is_finite() && err <= 1.0 => {
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    return Ok(Proposal { h, y, dy, next_h: (h * factor).min(self.ctl.max_step) });
                }
                Ok((_, _, err)) => {
                    self.rejected += 1;
                    let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
                    h *= factor;
                    if h < self.ctl.min_step {
                        return Err(StepFailure::StepTooSmall { t: self.t });
                    }
                }
                Err(e) => {
                    self.rejected += 1;
                    h *= 0.25;
                    if h < self.ctl.min_step {
                        return Err(StepFailure::Field { error: e, t: self.t });
                    }
                }
            }
        }
    }

    /// Vetoes a proposal for reasons outside error control; the next search
    /// starts from half its size.
    pub fn veto(&mut self, p: &Proposal<N>) -> Result<(), StepFailure<E>> {
        self.rejected += 1;
        self.h = 0.5 * p.h;
        if self.h < self.ctl.min_step {
            return Err(StepFailure::StepTooSmall { t: self.t });
        }
        Ok(())
    }

    pub fn commit(&mut self, p: Proposal<N>) {
        self.t += p.h;
        self.y = p.y;
        self.dy = p.dy;
        self.h = p.next_h;
        self.accepted += 1;
    }

    /// Solution after a partial step of size `s` from the current state.
    pub fn partial(&self, s: f64) -> Result<[f64; N], E> {
        if s == 0.0 {
            return Ok(self.y);
        }
        self.attempt(s).map(|(y, _, _)| y)
    }
}
