//! Branches of the first-return map `F_alpha` on I = [1/2, 1].
//!
//! Branch `r` maps `(y_{r+1}, y_r]` onto I with `r` excursions near the
//! neutral fixed point. Its inverse at `z` is `(z_r + 1)/2` and its weight
//! (inverse derivative) is `z_r'/2`.

use crate::error::{Error, Result};
use crate::function_space::{I_HI, I_LO};
use crate::observable::Observable;
use crate::orbit::{InverseOrbit, InverseOrbitState, ParamAlpha};

/// Inverse branch `r` of the induced map at one point, with derivatives.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BranchEval {
    pub r: usize,
    pub inv: f64,
    pub weight: f64,
    pub da_inv: f64,
    pub da_weight: f64,
    pub dweight: f64,
    pub d2weight: f64,
    pub da_dweight: f64,
}

impl From<&InverseOrbitState> for BranchEval {
    fn from(s: &InverseOrbitState) -> Self {
        Self {
            r: s.r,
            inv: 0.5 * (s.z + 1.0),
            weight: 0.5 * s.dz,
            da_inv: 0.5 * s.da_z,
            da_weight: 0.5 * s.da_dz,
            dweight: 0.5 * s.d2z,
            d2weight: 0.5 * s.d3z,
            da_dweight: 0.5 * s.da_d2z,
        }
    }
}

fn check_i(z: f64) -> Result<()> {
    if z.is_finite() && (I_LO..=I_HI).contains(&z) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "z",
            value: z,
            domain: "[1/2, 1]",
        })
    }
}

/// One backward-orbit sweep at a base point, shared by every branch quantity.
#[derive(Debug, Clone)]
pub struct OrbitSweep {
    pub alpha: ParamAlpha,
    pub states: Vec<InverseOrbitState>,
}

impl OrbitSweep {
    pub fn new(alpha: ParamAlpha, z: f64, r_max: usize) -> Result<Self> {
        let states: Vec<_> = InverseOrbit::new(alpha, z)?.take(r_max + 1).collect();
        if states.len() != r_max + 1 {
            return Err(Error::Convergence {
                alpha: alpha.get(),
                value: z,
            });
        }
        Ok(Self { alpha, states })
    }

    pub fn r_max(&self) -> usize {
        self.states.len() - 1
    }

    pub fn branch(&self, r: usize) -> BranchEval {
        BranchEval::from(&self.states[r])
    }

    /// `phi((z_r+1)/2) + sum_{j=1}^r phi(z_j)`
    pub fn induced_observable(&self, phi: &Observable, r: usize) -> f64 {
        let st = &self.states;
        phi.eval(0.5 * (st[r].z + 1.0)) + st[1..=r].iter().map(|s| phi.eval(s.z)).sum::<f64>()
    }

    /// Parameter derivative of [`OrbitSweep::induced_observable`].
    pub fn da_induced_observable(&self, phi: &Observable, r: usize) -> Result<f64> {
        phi.require_c1()?;
        let st = &self.states;
        let d = |x: f64| phi.deriv(x).unwrap_or(0.0);
        Ok(d(0.5 * (st[r].z + 1.0)) * 0.5 * st[r].da_z
            + st[1..=r].iter().map(|s| d(s.z) * s.da_z).sum::<f64>())
    }
}

pub fn eval_branch(alpha: ParamAlpha, r: usize, z: f64) -> Result<BranchEval> {
    check_i(z)?;
    Ok(OrbitSweep::new(alpha, z, r)?.branch(r))
}

/// Induced observable `Phi_alpha` composed with inverse branch `r`, at `z`.
pub fn induced_observable(phi: &Observable, alpha: ParamAlpha, r: usize, z: f64) -> Result<f64> {
    check_i(z)?;
    let sweep = OrbitSweep::new(alpha, z, r)?;
    let v = sweep.induced_observable(phi, r);
    if !v.is_finite() {
        return Err(Error::Domain {
            what: "induced observable",
            value: v,
            domain: "finite reals",
        });
    }
    Ok(v)
}

pub fn da_induced_observable(
    phi: &Observable,
    alpha: ParamAlpha,
    r: usize,
    z: f64,
) -> Result<f64> {
    check_i(z)?;
    OrbitSweep::new(alpha, z, r)?.da_induced_observable(phi, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::{map_raw, return_time};

    fn alpha(a: f64) -> ParamAlpha {
        ParamAlpha::new(a).unwrap()
    }

    #[test]
    fn branch_zero() {
        let b = eval_branch(alpha(0.4), 0, 0.8).unwrap();
        assert_eq!(b.inv, 0.9);
        assert_eq!(b.weight, 0.5);
        assert!(eval_branch(alpha(0.4), 0, 0.3).is_err());
    }

    #[test]
    fn weights_bounded_and_partial_sums_increase() {
        let a = alpha(0.6);
        for z in [0.5, 0.7, 1.0] {
            let sweep = OrbitSweep::new(a, z, 200).unwrap();
            let mut total = 0.0;
            for r in 0..=200 {
                let b = sweep.branch(r);
                assert!(b.weight <= 0.5 && b.weight > 0.0);
                total += b.weight;
            }
            assert!(total < 5.0);
        }
    }

    #[test]
    fn inverse_lands_in_its_branch_interval() {
        let a = alpha(0.5);
        let part = crate::orbit::branch_points(a, 40).unwrap();
        for z in [0.5, 0.66, 0.9, 1.0] {
            let sweep = OrbitSweep::new(a, z, 38).unwrap();
            for r in 0..=38 {
                let b = sweep.branch(r);
                assert!(b.inv >= part.ys[r + 1] - 1e-15 && b.inv <= part.ys[r] + 1e-15);
            }
        }
    }

    #[test]
    fn forward_iteration_round_trip() {
        let a = 0.35;
        for z in [0.55, 0.8, 0.97] {
            let sweep = OrbitSweep::new(alpha(a), z, 30).unwrap();
            for r in 0..=30 {
                let mut x = sweep.branch(r).inv;
                for _ in 0..=r {
                    x = map_raw(a, x);
                }
                assert!((x - z).abs() < 1e-10, "r={r} z={z}");
            }
        }
    }

    #[test]
    fn induced_observable_matches_forward_sum() {
        let a = 0.45;
        let phi = Observable::cosine(1.0);
        for z in [0.6, 0.93] {
            for r in [0, 1, 5, 12] {
                let x0 = eval_branch(alpha(a), r, z).unwrap().inv;
                let tau = return_time(alpha(a), x0).unwrap();
                assert_eq!(tau, r + 1);
                let mut x = x0;
                let mut direct = 0.0;
                for _ in 0..tau {
                    direct += phi.eval(x);
                    x = map_raw(a, x);
                }
                let got = induced_observable(&phi, alpha(a), r, z).unwrap();
                assert!((got - direct).abs() < 1e-9, "r={r}");
            }
        }
        assert_eq!(induced_observable(&Observable::one(), alpha(a), 7, 0.7).unwrap(), 8.0);
        assert_eq!(da_induced_observable(&Observable::one(), alpha(a), 7, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn da_induced_observable_matches_finite_difference() {
        let phi = Observable::polynomial(vec![0.3, -1.0, 2.0]).unwrap();
        let (a, eps) = (0.55, 1e-4);
        for r in [0, 3, 25] {
            let d = da_induced_observable(&phi, alpha(a), r, 0.8).unwrap();
            let up = induced_observable(&phi, alpha(a + eps), r, 0.8).unwrap();
            let dn = induced_observable(&phi, alpha(a - eps), r, 0.8).unwrap();
            assert!((d - (up - dn) / (2.0 * eps)).abs() < 1e-7, "r={r}");
        }
    }
}
