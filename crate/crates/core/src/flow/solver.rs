use std::f64::consts::PI;

use nalgebra::Vector2;

use super::{FlowSolverConfig, Method, START_PERTURBATION};
use crate::error::{CrossingKind, Error, Result};
use crate::fields::{Bands, FieldId, PiecewiseField};
use crate::torus::TorusPoint;

/// Normal speeds below this are treated as tangential.
const TANGENTIAL_TOL: f64 = 1e-12;

pub(super) struct Sample {
    pub position: TorusPoint<2>,
    pub log_jacobian: f64,
    pub absorbed: bool,
}

pub(super) struct TrajectoryOutput {
    pub samples: Vec<Sample>,
    pub perturbed: bool,
}

#[derive(Clone, Copy, Debug)]
struct State {
    /// Unwrapped position.
    x: Vector2<f64>,
    log_j: f64,
    /// Lower end of the current band in the lifted level coordinate `⟨k,x⟩`.
    band_lo: f64,
    side: usize,
    crossings: usize,
    absorbed: bool,
}

fn lifted_level(k: [i32; 2], x: &Vector2<f64>) -> f64 {
    k[0] as f64 * x[0] + k[1] as f64 * x[1]
}

impl State {
    fn new(field: &PiecewiseField, x: Vector2<f64>) -> Self {
        let (band_lo, side) = match field.bands() {
            Some(b) => {
                let twice = (2.0 * lifted_level(b.k, &x)).floor();
                (twice / 2.0, (twice as i64).rem_euclid(2) as usize)
            }
            None => (0.0, 0),
        };
        State {
            x,
            log_j: 0.0,
            band_lo,
            side,
            crossings: 0,
            absorbed: false,
        }
    }

    fn output(&self) -> Sample {
        Sample {
            position: TorusPoint::origin().translate(&self.x),
            log_jacobian: self.log_j,
            absorbed: self.absorbed,
        }
    }
}

/// Classical RK4 step for `(x, log J)` under `σ·b`.
fn rk4_smooth(field: &PiecewiseField, sigma: f64, x: &Vector2<f64>, h: f64) -> (Vector2<f64>, f64) {
    let f = |y: &Vector2<f64>| (field.eval_lenient(y) * sigma, field.div_lenient(y) * sigma);
    let (k1, d1) = f(x);
    let (k2, d2) = f(&(x + k1 * (h / 2.0)));
    let (k3, d3) = f(&(x + k2 * (h / 2.0)));
    let (k4, d4) = f(&(x + k3 * h));
    (
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0),
        (d1 + 2.0 * d2 + 2.0 * d3 + d4) * (h / 6.0),
    )
}

/// RK4 with the frozen velocity of the current piece.
fn rk4_piece(v: &Vector2<f64>, x: &Vector2<f64>, h: f64) -> Vector2<f64> {
    let (k1, k2, k3, k4) = (*v, *v, *v, *v);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Exact flow of `ẋ₁ = σ sin 2πx₁` over time `h`, with the log-Jacobian
/// increment. With `φ = πx₁`, `tan φ(t) = tan φ₀ · e^{2πσt}`.
fn sine_shear_exact(sigma: f64, x: &Vector2<f64>, h: f64) -> (Vector2<f64>, f64) {
    let grow = (PI * sigma * h).exp();
    // φ₀ ∈ [0, π) on the unit cell containing x₁; atan2 keeps the branch
    let base = x[0].floor();
    let (s0, c0) = (PI * (x[0] - base)).sin_cos();
    let phi_t = (s0 * grow).atan2(c0 / grow);
    let new_x0 = base + phi_t / PI;
    let dlog = -(c0 * c0 / (grow * grow) + s0 * s0 * grow * grow).ln();
    (Vector2::new(new_x0, x[1]), dlog)
}

struct Stepper<'a> {
    field: &'a PiecewiseField,
    config: &'a FlowSolverConfig,
    sigma: f64,
}

impl<'a> Stepper<'a> {
    fn advance(&self, mut st: State, dt: f64) -> Result<State> {
        if st.absorbed || dt <= 0.0 {
            return Ok(st);
        }
        match self.field.bands() {
            None => {
                let (x, dl) = match self.config.method {
                    Method::Rk4Event => rk4_smooth(self.field, self.sigma, &st.x, dt),
                    Method::ExplicitExact => match self.field.id {
                        FieldId::B => sine_shear_exact(self.sigma, &st.x, dt),
                        id => {
                            return Err(Error::UnsupportedMethod {
                                field: id,
                                method: "explicit_exact",
                            })
                        }
                    },
                };
                st.x = x;
                st.log_j += dl;
                Ok(st)
            }
            Some(bands) => self.advance_banded(bands, st, dt),
        }
    }

    fn advance_banded(&self, bands: &Bands, mut st: State, dt: f64) -> Result<State> {
        let k = bands.k;
        let kv = Vector2::new(k[0] as f64, k[1] as f64);
        let mut remaining = dt;
        while remaining > 0.0 {
            let v = bands.value(st.side) * self.sigma;
            let s0 = lifted_level(k, &st.x);
            let rate = kv.dot(&v);
            let (hit, target) = match self.config.method {
                Method::ExplicitExact => {
                    let (t, lvl) = if rate > 0.0 {
                        ((st.band_lo + 0.5 - s0) / rate, st.band_lo + 0.5)
                    } else if rate < 0.0 {
                        ((st.band_lo - s0) / rate, st.band_lo)
                    } else {
                        (f64::INFINITY, 0.0)
                    };
                    if t < remaining {
                        (Some(t.max(0.0)), lvl)
                    } else {
                        (None, 0.0)
                    }
                }
                Method::Rk4Event => {
                    let cand = rk4_piece(&v, &st.x, remaining);
                    let s1 = lifted_level(k, &cand);
                    if s1 < st.band_lo || s1 > st.band_lo + 0.5 {
                        let lvl = if s1 < st.band_lo { st.band_lo } else { st.band_lo + 0.5 };
                        (Some(self.bisect(&v, &st.x, k, lvl, remaining)), lvl)
                    } else {
                        (None, 0.0)
                    }
                }
            };
            let Some(tau) = hit else {
                st.x = match self.config.method {
                    Method::Rk4Event => rk4_piece(&v, &st.x, remaining),
                    Method::ExplicitExact => st.x + v * remaining,
                };
                break;
            };
            let mut xc = match self.config.method {
                Method::Rk4Event => rk4_piece(&v, &st.x, tau),
                Method::ExplicitExact => st.x + v * tau,
            };
            xc -= kv * ((lifted_level(k, &xc) - target) / kv.norm_squared());
            st.x = xc;
            remaining -= tau;
            st = self.cross(bands, st, target, v)?;
            if st.absorbed {
                break;
            }
        }
        Ok(st)
    }

    /// Smallest `τ` (to `event_tol`) at which the frozen-piece step reaches `level`.
    fn bisect(&self, v: &Vector2<f64>, x: &Vector2<f64>, k: [i32; 2], level: f64, h: f64) -> f64 {
        let inside = |tau: f64| {
            let s = lifted_level(k, &rk4_piece(v, x, tau));
            (s - level) * (lifted_level(k, x) - level) > 0.0
        };
        let (mut lo, mut hi) = (0.0, h);
        while hi - lo > self.config.event_tol {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    fn cross(&self, bands: &Bands, mut st: State, level: f64, v_from: Vector2<f64>) -> Result<State> {
        let up = (level - st.band_lo) > 0.25;
        let n = bands.normal() * if up { 1.0 } else { -1.0 };
        let new_side = 1 - st.side;
        let v_to = bands.value(new_side) * self.sigma;
        let a_p = v_from.dot(&n);
        let a_q = v_to.dot(&n);
        let point = TorusPoint::origin().translate(&st.x).to_array();
        if a_p.abs() <= TANGENTIAL_TOL || a_q.abs() <= TANGENTIAL_TOL {
            return Err(Error::NonTransversalCrossing {
                field: self.field.id,
                point,
                kind: CrossingKind::Tangential,
            });
        }
        if a_q > 0.0 {
            st.log_j += (a_q / a_p).ln();
            st.side = new_side;
            st.band_lo += if up { 0.5 } else { -0.5 };
            st.crossings += 1;
            if st.crossings > self.config.max_crossings {
                return Err(Error::Runaway {
                    field: self.field.id,
                    start: point,
                    max: self.config.max_crossings,
                });
            }
            return Ok(st);
        }
        // both one-sided fields point into the line
        if self.sigma < 0.0 {
            return Err(Error::NonTransversalCrossing {
                field: self.field.id,
                point,
                kind: CrossingKind::AttractingBackward,
            });
        }
        let lambda = a_q / (a_q - a_p);
        let sliding = v_from * lambda + v_to * (1.0 - lambda);
        if sliding.norm() > TANGENTIAL_TOL {
            return Err(Error::NonTransversalCrossing {
                field: self.field.id,
                point,
                kind: CrossingKind::Sliding,
            });
        }
        st.absorbed = true;
        Ok(st)
    }
}

/// Integrate one trajectory to the sorted output `times` (containing 0).
pub(super) fn trajectory(
    field: &PiecewiseField,
    config: &FlowSolverConfig,
    x0: &TorusPoint<2>,
    times: &[f64],
) -> Result<TrajectoryOutput> {
    let mut start = *x0.coords();
    let mut perturbed = false;
    if let Some(j) = field.jumps().iter().find(|j| j.contains(x0)) {
        start += j.eta * (START_PERTURBATION * config.start_side.sign());
        perturbed = true;
    }
    let forward: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    let backward: Vec<f64> = times.iter().rev().copied().filter(|&t| t < 0.0).map(|t| -t).collect();
    let init = State::new(field, start);

    let back = chain(field, config, -1.0, init, &backward)?;
    let fwd = chain(field, config, 1.0, init, &forward)?;

    let mut samples = Vec::with_capacity(times.len());
    samples.extend(back.into_iter().rev().map(|s| s.output()));
    // t = 0 reports the unperturbed start
    samples.push(Sample {
        position: *x0,
        log_jacobian: 0.0,
        absorbed: false,
    });
    samples.extend(fwd.into_iter().map(|s| s.output()));
    Ok(TrajectoryOutput { samples, perturbed })
}

/// States at the (ascending, positive) `times`. Stepping methods follow the
/// fixed chain `k·h` and take each output as a partial step off the chain.
fn chain(
    field: &PiecewiseField,
    config: &FlowSolverConfig,
    sigma: f64,
    init: State,
    times: &[f64],
) -> Result<Vec<State>> {
    let stepper = Stepper { field, config, sigma };
    if config.method == Method::ExplicitExact {
        // exact maps compose, so no intermediate grid is needed
        let mut st = init;
        let mut now = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            st = stepper.advance(st, t - now)?;
            now = t;
            out.push(st);
        }
        return Ok(out);
    }
    let h = config.step;
    let mut st = init;
    let mut k = 0u64;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let target = (t / h + 1e-9).floor() as u64;
        while k < target {
            st = stepper.advance(st, h)?;
            k += 1;
        }
        let partial = t - k as f64 * h;
        out.push(if partial > 1e-12 * h {
            stepper.advance(st, partial)?
        } else {
            st
        });
    }
    Ok(out)
}

/// Position and `log J` of a single trajectory at time `t`.
pub fn flow_point(
    field: &PiecewiseField,
    config: &FlowSolverConfig,
    x: &TorusPoint<2>,
    t: f64,
) -> Result<(TorusPoint<2>, f64)> {
    config.validate()?;
    let times = if t == 0.0 {
        vec![0.0]
    } else if t > 0.0 {
        vec![0.0, t]
    } else {
        vec![t, 0.0]
    };
    let out = trajectory(field, config, x, &times)?;
    let idx = if t < 0.0 { 0 } else { times.len() - 1 };
    let s = &out.samples[idx];
    Ok((s.position, s.log_jacobian))
}
