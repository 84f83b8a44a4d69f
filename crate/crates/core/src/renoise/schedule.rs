use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time schedule `(t_k)` for `k = 0..K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum TimeSchedule {
    /// `t_k = t_min + ((k + 1)/K)^γ (t_max − t_min)`.
    PowerLaw { t_min: f64, t_max: f64, gamma: f64 },
    /// `t_k = t_max − c·r^k`.
    Geometric { t_max: f64, c: f64, r: f64 },
    Constant { t: f64 },
    /// `t_k = t_max − 1/(k + 2)`, clamped at 0; not summable.
    Harmonic { t_max: f64 },
}

impl TimeSchedule {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match *self {
            TimeSchedule::PowerLaw { t_min, t_max, gamma } => {
                if !(0.0..1.0).contains(&t_min) || !(0.0..1.0).contains(&t_max) || t_min > t_max {
                    return Err(Error::param(format!(
                        "power-law schedule needs 0 <= t_min <= t_max < 1, got [{t_min}, {t_max}]"
                    )));
                }
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::param(format!("gamma must be > 0, got {gamma}")));
                }
            }
            TimeSchedule::Geometric { t_max, c, r } => {
                if !(0.0..1.0).contains(&t_max) || !(c >= 0.0) || c > t_max || !(r > 0.0 && r < 1.0) {
                    return Err(Error::param(format!(
                        "geometric schedule needs t_max in [0, 1), 0 <= c <= t_max, 0 < r < 1; got ({t_max}, {c}, {r})"
                    )));
                }
            }
            TimeSchedule::Constant { t } => {
                if !unit(t) {
                    return Err(Error::param(format!("constant time {t} outside [0, 1]")));
                }
            }
            TimeSchedule::Harmonic { t_max } => {
                if !(0.0..1.0).contains(&t_max) {
                    return Err(Error::param(format!("t_max {t_max} outside [0, 1)")));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, k: usize, iterations: usize) -> Result<f64> {
        if k >= iterations {
            return Err(Error::param(format!("iteration {k} out of range for K = {iterations}")));
        }
        Ok(match *self {
            TimeSchedule::PowerLaw { t_min, t_max, gamma } => {
                if k + 1 == iterations {
                    t_max
                } else {
                    let r = (k + 1) as f64 / iterations as f64;
                    (t_min + r.powf(gamma) * (t_max - t_min)).min(t_max)
                }
            }
            TimeSchedule::Geometric { t_max, c, r } => t_max - c * r.powi(k as i32),
            TimeSchedule::Constant { t } => t,
            TimeSchedule::Harmonic { t_max } => (t_max - 1.0 / (k as f64 + 2.0)).max(0.0),
        })
    }

    /// Value the schedule approaches as `k → ∞`.
    pub fn limit(&self) -> f64 {
        match *self {
            TimeSchedule::PowerLaw { t_max, .. }
            | TimeSchedule::Geometric { t_max, .. }
            | TimeSchedule::Harmonic { t_max } => t_max,
            TimeSchedule::Constant { t } => t,
        }
    }
}

/// Monte Carlo sample counts `(N_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSchedule {
    Constant {
        #[serde(rename = "N")]
        n: usize,
    },
    /// `N_e` while `k/K < s₁`, `N_m` while `k/K < s₂`, then `N_l`.
    ThreePhase {
        #[serde(rename = "N_e")]
        n_e: usize,
        #[serde(rename = "N_m")]
        n_m: usize,
        #[serde(rename = "N_l")]
        n_l: usize,
        s1: f64,
        s2: f64,
    },
}

impl SampleSchedule {
    pub fn three_phase(n_e: usize, n_m: usize, n_l: usize, s1: f64, s2: f64) -> Self {
        SampleSchedule::ThreePhase { n_e, n_m, n_l, s1, s2 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SampleSchedule::Constant { n } if n == 0 => Err(Error::param("sample count must be >= 1")),
            SampleSchedule::ThreePhase { n_e, n_m, n_l, s1, s2 } => {
                if n_e == 0 || n_m == 0 || n_l == 0 {
                    return Err(Error::param("sample counts must be >= 1"));
                }
                if !(s1 > 0.0 && s1 < s2 && s2 <= 1.0) {
                    return Err(Error::param(format!("phase boundaries need 0 < s1 < s2 <= 1, got ({s1}, {s2})")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, k: usize, iterations: usize) -> usize {
        match *self {
            SampleSchedule::Constant { n } => n,
            SampleSchedule::ThreePhase { n_e, n_m, n_l, s1, s2 } => {
                let frac = k as f64 / iterations as f64;
                if frac < s1 {
                    n_e
                } else if frac < s2 {
                    n_m
                } else {
                    n_l
                }
            }
        }
    }

    /// `Σ_k N_k` over `K` iterations.
    pub fn total(&self, iterations: usize) -> usize {
        (0..iterations).map(|k| self.eval(k, iterations)).sum()
    }
}

impl std::fmt::Display for SampleSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            SampleSchedule::Constant { n } => write!(f, "const({n})"),
            SampleSchedule::ThreePhase { n_e, n_m, n_l, s1, s2 } => {
                write!(f, "3ph({n_e},{n_m},{n_l};{s1},{s2})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn power_law_examples() {
        let s = TimeSchedule::PowerLaw { t_min: 0.5, t_max: 0.95, gamma: 1.0 };
        assert!((s.eval(49, 100).unwrap() - 0.725).abs() < 1e-15);
        assert_eq!(s.eval(99, 100).unwrap(), 0.95);
        assert!(s.eval(100, 100).is_err());
        let odd = TimeSchedule::PowerLaw { t_min: 0.1, t_max: 0.9, gamma: 0.37 };
        assert_eq!(odd.eval(6, 7).unwrap(), 0.9);

        let quad = TimeSchedule::PowerLaw { t_min: 0.3, t_max: 0.95, gamma: 2.0 };
        let lin = TimeSchedule::PowerLaw { t_min: 0.3, t_max: 0.95, gamma: 1.0 };
        for k in 0..99 {
            assert!(quad.eval(k, 100).unwrap() <= lin.eval(k, 100).unwrap());
        }
    }

    #[test]
    fn three_phase_budget() {
        let s = SampleSchedule::three_phase(1, 1, 41, 0.5, 0.9);
        assert_eq!(s.eval(10, 100), 1);
        assert_eq!(s.eval(60, 100), 1);
        assert_eq!(s.eval(95, 100), 41);
        assert_eq!(s.total(100), 500);
        assert_eq!(SampleSchedule::Constant { n: 5 }.eval(37, 100), 5);

        let no_late = SampleSchedule::three_phase(1, 2, 9, 0.5, 1.0);
        assert_eq!(no_late.eval(99, 100), 2);
        assert_eq!(no_late.eval(49, 100), 1);
    }

    #[test]
    fn validation() {
        assert!(SampleSchedule::three_phase(0, 1, 2, 0.5, 0.9).validate().is_err());
        assert!(SampleSchedule::three_phase(1, 1, 2, 0.9, 0.5).validate().is_err());
        assert!(SampleSchedule::Constant { n: 0 }.validate().is_err());
        assert!(TimeSchedule::PowerLaw { t_min: 0.5, t_max: 1.0, gamma: 1.0 }.validate().is_err());
        assert!(TimeSchedule::PowerLaw { t_min: 0.6, t_max: 0.5, gamma: 1.0 }.validate().is_err());
        assert!(TimeSchedule::PowerLaw { t_min: 0.1, t_max: 0.5, gamma: 0.0 }.validate().is_err());
        assert!(TimeSchedule::Geometric { t_max: 0.9, c: 0.3, r: 1.0 }.validate().is_err());
        assert!(TimeSchedule::Constant { t: 1.0 }.validate().is_ok());
    }

    #[test]
    fn serde_shapes() {
        let t: TimeSchedule = serde_json::from_str(r#"{"t_min":0.1,"t_max":0.9,"gamma":2.0}"#).unwrap();
        assert_eq!(t, TimeSchedule::PowerLaw { t_min: 0.1, t_max: 0.9, gamma: 2.0 });
        let s: SampleSchedule =
            serde_json::from_str(r#"{"kind":"three_phase","N_e":1,"N_m":3,"N_l":35,"s1":0.6,"s2":0.9}"#).unwrap();
        assert_eq!(s.total(100), 500);
        let c: SampleSchedule = serde_json::from_str(r#"{"kind":"constant","N":5}"#).unwrap();
        assert_eq!(c, SampleSchedule::Constant { n: 5 });
        assert_eq!(s.to_string(), "3ph(1,3,35;0.6,0.9)");
    }

    proptest! {
        #[test]
        fn power_law_monotone(t_min in 0.0f64..0.9, span in 0.0f64..0.09, gamma in 0.1f64..4.0, k_total in 1usize..300) {
            let s = TimeSchedule::PowerLaw { t_min, t_max: t_min + span, gamma };
            s.validate().unwrap();
            let ts: Vec<f64> = (0..k_total).map(|k| s.eval(k, k_total).unwrap()).collect();
            prop_assert!(ts.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(*ts.last().unwrap(), t_min + span);
        }

        #[test]
        fn three_phase_monotone(n_e in 1usize..5, dm in 0usize..5, dl in 0usize..50, s1 in 0.05f64..0.9, ds in 0.01f64..0.5, k_total in 1usize..300) {
            let s2 = (s1 + ds).min(1.0);
            let s = SampleSchedule::three_phase(n_e, n_e + dm, n_e + dm + dl, s1, s2);
            let ns: Vec<usize> = (0..k_total).map(|k| s.eval(k, k_total)).collect();
            prop_assert!(ns.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
