//! Seeded generators for every model family.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`, seeded with
//! `seed_from_u64`) and standard normal draws from `rand_distr::StandardNormal`
//! (ziggurat). Noise is multiplicative: `value = model(r) * exp(sigma * z_r)`,
//! with `z_r` drawn in rank order `r = 1..=N`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genmodels::{eval_gen, GenFit, GenModel};
use crate::rankfit::{Metric, RankSeries};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    Io(String),
}

/// Parameters of the generating model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `y0 * r^beta`.
    Power { y0: f64, beta: f64 },
    /// Continuous broken line in log-log space: `slopes[i]` applies after
    /// `breakpoints[i - 1]` (ranks, ascending).
    Segmented {
        y0: f64,
        slopes: Vec<f64>,
        breakpoints: Vec<f64>,
    },
    /// `amplitude * (N + 1 - r)^b / r^a`.
    Dgbd { amplitude: f64, a: f64, b: f64 },
    /// `amplitude * (N + 1 - r + d)^b / (r + c)^a`.
    Ac5 {
        amplitude: f64,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    /// Preferential attachment; `n` is the number of steps.
    Yule { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(flatten)]
    pub family: Family,
    /// Number of ranks, or of steps for `yule`.
    pub n: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let spec: SynthSpec =
            serde_json::from_str(text).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            ));
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match &self.family {
            Family::Power { y0, beta } => {
                if !(*y0 > 0.0) || !finite(&[*y0, *beta]) {
                    return bad("power needs y0 > 0 and finite beta".into());
                }
            }
            Family::Segmented {
                y0,
                slopes,
                breakpoints,
            } => {
                if !(*y0 > 0.0) || !finite(slopes) || !finite(breakpoints) {
                    return bad("segmented needs y0 > 0 and finite slopes and breakpoints".into());
                }
                if slopes.len() != breakpoints.len() + 1 {
                    return bad(format!(
                        "segmented needs one more slope than breakpoints, got {} and {}",
                        slopes.len(),
                        breakpoints.len()
                    ));
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1])
                    || breakpoints.iter().any(|b| *b < 1.0)
                {
                    return bad("breakpoints must be ascending ranks >= 1".into());
                }
            }
            Family::Dgbd { amplitude, a, b } => {
                if !(*amplitude > 0.0) || !finite(&[*a, *b]) {
                    return bad("dgbd needs amplitude > 0 and finite exponents".into());
                }
            }
            Family::Ac5 {
                amplitude,
                a,
                b,
                c,
                d,
            } => {
                if !(*amplitude > 0.0) || !finite(&[*a, *b, *c, *d]) || !(*c > -1.0) || !(*d > -1.0)
                {
                    return bad("ac5 needs amplitude > 0 and c, d > -1".into());
                }
            }
            Family::Yule { alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return bad(format!("yule alpha must be in (0, 1], got {alpha}"));
                }
            }
        }
        Ok(())
    }

    /// Noise-free model value at rank `r` (not defined for `yule`).
    fn model(&self, r: usize) -> Option<f64> {
        let n = self.n;
        let rf = r as f64;
        Some(match &self.family {
            Family::Power { y0, beta } => y0 * rf.powf(*beta),
            Family::Segmented {
                y0,
                slopes,
                breakpoints,
            } => {
                let x = rf.log10();
                let mut ly = y0.log10() + slopes[0] * x;
                for (i, b) in breakpoints.iter().enumerate() {
                    ly += (slopes[i + 1] - slopes[i]) * (x - b.log10()).max(0.0);
                }
                10f64.powf(ly)
            }
            Family::Dgbd { amplitude, a, b } => {
                let g = GenFit::from_params(GenModel::Dgbd3, *amplitude, *a, *b, 0.0, 0.0, n);
                eval_gen(&g, r).ok()?
            }
            Family::Ac5 {
                amplitude,
                a,
                b,
                c,
                d,
            } => {
                let g = GenFit::from_params(GenModel::Ac5, *amplitude, *a, *b, *c, *d, n);
                eval_gen(&g, r).ok()?
            }
            Family::Yule { .. } => return None,
        })
    }
}

/// Values in rank order `1..=N`, noise applied, not re-sorted.
///
/// With `noise_sigma > 0` the values need not be monotone; they are the raw
/// regression data the fitters see when ranks are taken as given.
pub fn generate_points<T: Real>(spec: &SynthSpec) -> Result<Vec<T>, SynthError> {
    spec.validate()?;
    if let Family::Yule { alpha } = spec.family {
        return Ok(yule_counts(alpha, spec.n, spec.seed)
            .into_iter()
            .map(|c| T::lit(c as f64))
            .collect());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.n);
    for r in 1..=spec.n {
        let base = spec
            .model(r)
            .ok_or_else(|| SynthError::InvalidSpec(format!("model undefined at rank {r}")))?;
        let z: f64 = rng.sample(StandardNormal);
        let v = base * (spec.noise_sigma * z).exp();
        if !(v > 0.0) || !v.is_finite() {
            return Err(SynthError::InvalidSpec(format!(
                "model value {v} at rank {r} is not positive"
            )));
        }
        out.push(T::lit(v));
    }
    Ok(out)
}

/// Generates a rank series: [`generate_points`] re-sorted descending, with
/// labels `item{r}` naming each value's generating rank.
pub fn generate<T: Real>(spec: &SynthSpec) -> Result<RankSeries<T>, SynthError> {
    if let Family::Yule { alpha } = spec.family {
        spec.validate()?;
        return generate_yule(alpha, spec.n, spec.seed);
    }
    let values = generate_points::<f64>(spec)?;
    let series = RankSeries::from_pairs(
        values.into_iter().enumerate().map(|(i, v)| {
            (
                format!("item{:0width$}", i + 1, width = digits(spec.n)),
                T::lit(v),
            )
        }),
        Metric::Amount,
    )
    .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    Ok(series)
}

fn digits(n: usize) -> usize {
    n.to_string().len()
}

/// Preferential attachment: each step creates a new entity with probability
/// `alpha`, otherwise adds one event to an existing entity chosen with
/// probability proportional to its count. The first step always creates.
pub fn generate_yule<T: Real>(
    alpha: f64,
    steps: usize,
    seed: u64,
) -> Result<RankSeries<T>, SynthError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SynthError::InvalidSpec(format!(
            "yule alpha must be in (0, 1], got {alpha}"
        )));
    }
    if steps == 0 {
        return Err(SynthError::InvalidSpec("steps must be at least 1".into()));
    }
    let counts = yule_counts(alpha, steps, seed);
    let width = digits(counts.len());
    RankSeries::from_pairs(
        counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (format!("entity{:0width$}", i + 1), T::lit(c as f64))),
        Metric::Count,
    )
    .map_err(|e| SynthError::InvalidSpec(e.to_string()))
}

/// Entity counts in creation order.
fn yule_counts(alpha: f64, steps: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut counts: Vec<u64> = Vec::new();
    // One urn entry per event; a uniform draw picks an entity proportionally to its count.
    let mut urn: Vec<u32> = Vec::with_capacity(steps);
    for step in 0..steps {
        let create = step == 0 || alpha >= 1.0 || rng.random::<f64>() < alpha;
        let id = if create {
            counts.push(0);
            counts.len() - 1
        } else {
            urn[rng.random_range(0..urn.len())] as usize
        };
        counts[id] += 1;
        urn.push(id as u32);
    }
    counts
}

/// Writes `rank,label,value` rows.
pub fn write_series_csv<T: Real, W: Write>(
    series: &RankSeries<T>,
    out: W,
) -> Result<(), SynthError> {
    let io = |e: csv::Error| SynthError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "label", "value"]).map_err(io)?;
    for (i, (label, v)) in series.labels.iter().zip(&series.values).enumerate() {
        w.write_record([(i + 1).to_string(), label.clone(), format!("{v}")])
            .map_err(io)?;
    }
    w.flush().map_err(|e| SynthError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: Family, n: usize, sigma: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            family,
            n,
            noise_sigma: sigma,
            seed,
        }
    }

    #[test]
    fn power_forward() {
        let s = spec(
            Family::Power {
                y0: 100.0,
                beta: -1.0,
            },
            10,
            0.0,
            0,
        );
        let v = generate::<f64>(&s).unwrap();
        let expect: Vec<f64> = (1..=10).map(|r| 100.0 / r as f64).collect();
        for (a, b) in v.values.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(v.values[0], 100.0);
        assert_eq!(v.labels[0], "item01");
    }

    #[test]
    fn deterministic() {
        let s = spec(
            Family::Power {
                y0: 10.0,
                beta: -0.8,
            },
            500,
            0.3,
            42,
        );
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_series_csv(&generate::<f64>(&s).unwrap(), &mut a).unwrap();
        write_series_csv(&generate::<f64>(&s).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let other = spec(
            Family::Power {
                y0: 10.0,
                beta: -0.8,
            },
            500,
            0.3,
            43,
        );
        assert_ne!(
            generate::<f64>(&other).unwrap().values,
            generate::<f64>(&s).unwrap().values
        );
    }

    #[test]
    fn noisy_points_keep_rank_order_but_series_is_sorted() {
        let s = spec(
            Family::Power {
                y0: 10.0,
                beta: -0.1,
            },
            200,
            0.5,
            7,
        );
        let pts = generate_points::<f64>(&s).unwrap();
        assert!(pts.windows(2).any(|w| w[1] > w[0]));
        let ser = generate::<f64>(&s).unwrap();
        assert!(ser.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn segmented_forward() {
        let s = spec(
            Family::Segmented {
                y0: 1000.0,
                slopes: vec![-0.3, -1.5],
                breakpoints: vec![100.0],
            },
            1000,
            0.0,
            0,
        );
        let v = generate_points::<f64>(&s).unwrap();
        assert!((v[99] - 1000.0 * 100f64.powf(-0.3)).abs() < 1e-9);
        assert!((v[999] - 1000.0 * 100f64.powf(-0.3) * 10f64.powf(-1.5)).abs() < 1e-9);
    }

    #[test]
    fn yule_degenerate_cases() {
        let s = generate_yule::<f64>(1.0, 50, 3).unwrap();
        assert_eq!(s.len(), 50);
        assert!(s.values.iter().all(|v| *v == 1.0));
        let s = generate_yule::<f64>(0.3, 1, 3).unwrap();
        assert_eq!(s.values, [1.0]);
        assert!(generate_yule::<f64>(0.0, 10, 1).is_err());
        assert!(generate_yule::<f64>(0.5, 0, 1).is_err());
    }

    #[test]
    fn yule_mass_conserved() {
        let s = generate_yule::<f64>(0.2, 10_000, 9).unwrap();
        assert_eq!(s.values.iter().sum::<f64>(), 10_000.0);
    }

    #[test]
    fn spec_json() {
        let s = SynthSpec::from_json(
            r#"{"family":"dgbd","amplitude":1000,"a":0.5,"b":0.3,"n":100,"seed":3}"#,
        )
        .unwrap();
        assert_eq!(
            s.family,
            Family::Dgbd {
                amplitude: 1000.0,
                a: 0.5,
                b: 0.3
            }
        );
        assert_eq!(s.noise_sigma, 0.0);
        let back = serde_json::to_string(&s).unwrap();
        assert_eq!(SynthSpec::from_json(&back).unwrap(), s);
        assert!(SynthSpec::from_json(
            r#"{"family":"power","y0":1,"beta":-1,"n":5,"noise_sigma":-1}"#
        )
        .is_err());
        assert!(SynthSpec::from_json(
            r#"{"family":"ac5","amplitude":1,"a":1,"b":1,"c":-2,"d":0,"n":5}"#
        )
        .is_err());
        assert!(SynthSpec::from_json(r#"{"family":"nope","n":5}"#).is_err());
    }
}
