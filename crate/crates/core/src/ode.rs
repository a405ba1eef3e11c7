//! Dormand-Prince 5(4) embedded Runge-Kutta pair.

use crate::scalar::Real;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights are the last row of A; these are fifth minus fourth.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Step-size controller settings.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5<T> {
    pub rtol: T,
    pub atol: T,
    pub safety: T,
    pub min_factor: T,
    pub max_factor: T,
}

impl<T: Real> Dopri5<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self {
            rtol,
            atol,
            safety: T::lit(0.9),
            min_factor: T::lit(0.2),
            max_factor: T::lit(5.0),
        }
    }

    /// One trial step. Returns the fifth-order solution and the scaled error norm
    /// (accept when `<= 1`).
    pub fn trial<const D: usize, F>(&self, rhs: &F, t: T, y: &[T; D], h: T) -> ([T; D], T)
    where
        F: Fn(T, &[T; D]) -> [T; D],
    {
        let mut k = [[T::zero(); D]; 7];
        k[0] = rhs(t, y);
        for s in 1..7 {
            let mut ys = *y;
            for (i, kk) in k.iter().enumerate().take(s) {
                let a = T::lit(A[s][i]);
                if a != T::zero() {
                    for d in 0..D {
                        ys[d] += h * a * kk[d];
                    }
                }
            }
            k[s] = rhs(t + T::lit(C[s]) * h, &ys);
            if s == 6 {
                let mut err = T::zero();
                for d in 0..D {
                    let e: T = (0..7).map(|i| T::lit(E[i]) * k[i][d]).sum::<T>() * h;
                    let sc = self.atol + self.rtol * y[d].abs().max(ys[d].abs());
                    err += (e / sc) * (e / sc);
                }
                return (ys, (err / T::lit(D as f64)).sqrt());
            }
        }
        unreachable!("seven stages")
    }

    /// Step-size factor suggested by an error norm.
    pub fn factor(&self, err: T) -> T {
        if err == T::zero() {
            return self.max_factor;
        }
        (self.safety * err.powf(T::lit(-0.2))).max(self.min_factor).min(self.max_factor)
    }
}

/// Classical fourth-order Runge-Kutta step; used as an independent reference.
pub fn rk4_step<T: Real, const D: usize, F>(rhs: &F, t: T, y: &[T; D], h: T) -> [T; D]
where
    F: Fn(T, &[T; D]) -> [T; D],
{
    let half = T::lit(0.5);
    let add = |y: &[T; D], k: &[T; D], c: T| {
        let mut out = *y;
        for d in 0..D {
            out[d] += c * k[d];
        }
        out
    };
    let k1 = rhs(t, y);
    let k2 = rhs(t + half * h, &add(y, &k1, half * h));
    let k3 = rhs(t + half * h, &add(y, &k2, half * h));
    let k4 = rhs(t + h, &add(y, &k3, h));
    let mut out = *y;
    for d in 0..D {
        out[d] += h / T::lit(6.0) * (k1[d] + T::lit(2.0) * (k2[d] + k3[d]) + k4[d]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(dp: &Dopri5<f64>, t1: f64) -> f64 {
        let rhs = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let (mut t, mut y, mut h) = (0.0f64, [1.0, 0.0], 0.1f64);
        while t < t1 {
            h = h.min(t1 - t);
            let (yn, err) = dp.trial(&rhs, t, &y, h);
            if err <= 1.0 {
                t += h;
                y = yn;
            }
            h *= dp.factor(err);
        }
        y[0]
    }

    #[test]
    fn harmonic_oscillator_to_tolerance() {
        let dp = Dopri5::new(1e-10, 1e-12);
        assert!((integrate(&dp, 10.0) - 10f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let rhs = |_t: f64, y: &[f64; 1]| [y[0]];
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = [1.0];
            for i in 0..n {
                y = rk4_step(&rhs, i as f64 * h, &y, h);
            }
            (y[0] - 1f64.exp()).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }
}
