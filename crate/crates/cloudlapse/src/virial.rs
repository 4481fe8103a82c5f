//! Virial functional `F(t) = ½[βEt² − MR²(t)] + H′(0)t + H(0)` and the
//! blowup certificates built on it.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Corollary constant multiplying `a` in `T♮ = κ₁a + κ₂`.
pub const KAPPA1: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialInputs {
    pub energy: f64,
    pub mass: f64,
    pub beta: f64,
    /// `H(0) = ½∫ρ|x|²`.
    pub h0: f64,
    /// `H′(0) = ∫ρ w·x`.
    pub h_prime0: f64,
}

impl VirialInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy > 0.0) {
            return Err(Error::NonpositiveEnergy(self.energy));
        }
        if !(self.mass > 0.0 && self.beta > 0.0 && self.h0 >= 0.0 && self.h_prime0.is_finite()) {
            return Err(Error::Degenerate(format!("virial inputs need M, β > 0 and H(0) ≥ 0: {self:?}")));
        }
        Ok(())
    }

    /// `κ₂ = 9|H′(0)|/(4βE)`.
    pub fn kappa2(&self) -> f64 {
        9.0 * self.h_prime0.abs() / (4.0 * self.beta * self.energy)
    }
}

/// `F(t)` for an enclosing radius `r = R(t)`.
pub fn virial_f(t: f64, r: f64, inp: &VirialInputs) -> f64 {
    0.5 * (inp.beta * inp.energy * t * t - inp.mass * r * r) + inp.h_prime0 * t + inp.h0
}

/// Linear envelope `R(t) = 2A(t + a)`.
pub fn linear_envelope(speed: f64, a: f64) -> impl Fn(f64) -> f64 {
    move |t| 2.0 * speed * (t + a)
}

/// Largest root `T†` of `F` along `R(t) = 2A(t+a)`, in closed form.
pub fn critical_time(inp: &VirialInputs, speed: f64, a: f64) -> Result<f64> {
    inp.validate()?;
    let limit = (inp.beta * inp.energy / inp.mass).sqrt() / 24.0;
    if !(speed < limit) {
        return Err(Error::ATooLarge { a_cap: speed, limit });
    }
    let f0 = virial_f(0.0, 2.0 * speed * a, inp);
    if f0 > 0.0 {
        return Err(Error::F0Positive(f0));
    }
    let (m, a2) = (inp.mass, speed * speed);
    let be = inp.beta * inp.energy;
    let lin = 4.0 * a * m * a2 - inp.h_prime0;
    let disc = lin * lin - 2.0 * (be - 4.0 * m * a2) * (inp.h0 - 2.0 * m * a2 * a * a);
    Ok((lin + disc.sqrt()) / (be - 4.0 * a2 * m))
}

/// `T♮ = κ₁σ⁻¹ + κ₂`.
pub fn supercritical_time(inp: &VirialInputs, sigma: f64) -> f64 {
    KAPPA1 / sigma + inp.kappa2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateVerdict {
    /// `F > 0` somewhere on the horizon: no classical solution survives past it.
    BlowupBeforeT,
    /// `F ≤ 0` throughout; see the limit check at the horizon.
    CriterionSatisfied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: CertificateVerdict,
    pub first_positive_t: Option<f64>,
    #[serde(rename = "T_dagger")]
    pub t_dagger: Option<f64>,
    #[serde(rename = "T_natural")]
    pub t_natural: Option<f64>,
    pub horizon: f64,
    /// `R²(T)` at the horizon.
    pub limit_lhs: f64,
    /// `βET²/M + 2H′(0)T/M + 2H(0)/M` at the horizon.
    pub limit_rhs: f64,
    pub inputs: VirialInputs,
}

/// Scans `F` over `(t, R(t))` samples covering `[0, horizon]`.
///
/// The first sign change to `F > 0` is located by linear interpolation
/// between samples.
pub fn blowup_certificate(inp: &VirialInputs, samples: &[(f64, f64)], horizon: f64) -> Result<Certificate> {
    inp.validate()?;
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(format!("need ≥ 2 radius samples, got {}", samples.len())));
    }
    let (t_first, t_last) = (samples[0].0, samples[samples.len() - 1].0);
    if t_first > 0.0 || t_last < horizon * (1.0 - 1e-12) {
        return Err(Error::InsufficientSamples(format!(
            "samples span [{t_first}, {t_last}] but the horizon is {horizon}"
        )));
    }
    let mut first_positive_t = None;
    let mut prev: Option<(f64, f64)> = None;
    for &(t, r) in samples.iter().filter(|s| s.0 <= horizon) {
        let f = virial_f(t, r, inp);
        if f > 0.0 {
            first_positive_t = Some(match prev {
                Some((tp, fp)) if fp <= 0.0 => tp + (t - tp) * (-fp) / (f - fp),
                _ => t,
            });
            break;
        }
        prev = Some((t, f));
    }
    let r_end = interpolate(samples, horizon);
    let (m, t) = (inp.mass, horizon);
    Ok(Certificate {
        verdict: if first_positive_t.is_some() { CertificateVerdict::BlowupBeforeT } else { CertificateVerdict::CriterionSatisfied },
        first_positive_t,
        t_dagger: None,
        t_natural: None,
        horizon,
        limit_lhs: r_end * r_end,
        limit_rhs: inp.beta * inp.energy * t * t / m + 2.0 * inp.h_prime0 * t / m + 2.0 * inp.h0 / m,
        inputs: *inp,
    })
}

fn interpolate(samples: &[(f64, f64)], t: f64) -> f64 {
    let i = samples.partition_point(|s| s.0 < t);
    if i == 0 {
        return samples[0].1;
    }
    if i >= samples.len() {
        return samples[samples.len() - 1].1;
    }
    let (a, b) = (samples[i - 1], samples[i]);
    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
}

/// Second divided differences of `(t, H)` on a possibly non-uniform grid,
/// reported at the interior nodes.
pub fn second_differences(series: &[(f64, f64)]) -> Vec<(f64, f64)> {
    series
        .windows(3)
        .map(|w| {
            let ((t0, h0), (t1, h1), (t2, h2)) = (w[0], w[1], w[2]);
            let d01 = (h1 - h0) / (t1 - t0);
            let d12 = (h2 - h1) / (t2 - t1);
            (t1, 2.0 * (d12 - d01) / (t2 - t0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> VirialInputs {
        VirialInputs { energy: 1.0, mass: 1.0, beta: 1.0, h0: 0.0, h_prime0: 0.0 }
    }

    #[test]
    fn f_worked_values() {
        let ball = VirialInputs { h0: 0.3, ..unit() };
        assert!((virial_f(0.0, 1.0, &ball) + 0.2).abs() < 1e-15);
        for t in [0.0, 0.7, 3.0] {
            assert_eq!(virial_f(t, t, &unit()), 0.0);
        }
        let r = linear_envelope(1.0 / 48.0, 10.0)(1.0);
        assert!((virial_f(1.0, r, &unit()) - 0.5 * (1.0 - 4.0 / 2304.0 * 121.0)).abs() < 1e-15);
        assert!((virial_f(1.0, r, &unit()) - 0.3950).abs() < 1e-4);
    }

    #[test]
    fn critical_and_supercritical_times() {
        let t = critical_time(&unit(), 1.0 / 48.0, 10.0).unwrap();
        assert!((t - 0.4348).abs() < 1e-4, "{t}");
        let tn = supercritical_time(&unit(), 0.1);
        assert!((tn - 1.0).abs() < 1e-15 && tn > t);
        assert!(matches!(critical_time(&unit(), 0.05, 10.0), Err(Error::ATooLarge { .. })));
        let heavy = VirialInputs { h0: 10.0, ..unit() };
        assert!(matches!(critical_time(&heavy, 1.0 / 48.0, 10.0), Err(Error::F0Positive(_))));
    }

    #[test]
    fn certificate_verdicts() {
        let inp = unit();
        let td = critical_time(&inp, 1.0 / 48.0, 10.0).unwrap();
        let env = linear_envelope(1.0 / 48.0, 10.0);
        let samples: Vec<_> = (0..=2000).map(|i| 2.0 * td * i as f64 / 2000.0).map(|t| (t, env(t))).collect();
        let c = blowup_certificate(&inp, &samples, 2.0 * td).unwrap();
        assert_eq!(c.verdict, CertificateVerdict::BlowupBeforeT);
        assert!((c.first_positive_t.unwrap() - td).abs() < 1e-6);

        let fast: Vec<_> = (0..=100).map(|i| i as f64 * 0.1).map(|t| (t, 2.0 * t + 1.0)).collect();
        let c = blowup_certificate(&inp, &fast, 10.0).unwrap();
        assert_eq!(c.verdict, CertificateVerdict::CriterionSatisfied);
        assert!(c.limit_lhs >= c.limit_rhs);

        let flat: Vec<_> = (0..=100).map(|i| (i as f64 * 0.05, 1.0)).collect();
        let c = blowup_certificate(&inp, &flat, 5.0).unwrap();
        assert!((c.first_positive_t.unwrap() - 1.0).abs() < 1e-3);

        assert!(blowup_certificate(&inp, &flat[..1], 5.0).is_err());
        assert!(blowup_certificate(&inp, &flat, 6.0).is_err());
    }

    #[test]
    fn second_difference_of_quadratic() {
        let s: Vec<_> = [0.0, 0.1, 0.3, 0.35, 0.9].iter().map(|&t| (t, 1.5 * t * t + t)).collect();
        for (_, d) in second_differences(&s) {
            assert!((d - 3.0).abs() < 1e-12);
        }
    }
}
