//! Event-driven free transport with Maxwell walls, and the absorbing problem.
//!
//! A particle stores the position where it was last seated on a wall (or
//! created) together with the time of that event. Its position at any later
//! time is the straight line from there, so observing an ensemble at
//! intermediate times never perturbs trajectories.

pub mod checkpoint;
mod initial;

pub use initial::{rqmc_moments, InitialData, Rqmc, CUBE_DIM};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Exit, PhaseState};
use crate::rng::{dynamics_stream_id, init_stream_id, stream_at, StreamRng};
use crate::stats::pairwise_sum;
use crate::wall::WallModel;
use crate::Vector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default bound on wall events per particle per advance call.
pub const MAX_EVENTS: u64 = 10_000_000;
/// Re-seating offset after a wall event, relative to the bounding radius.
pub const SEAT_OFFSET: f64 = 1e-11;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub diffuse: u64,
    pub specular: u64,
    pub grazing: u64,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.diffuse + self.specular
    }

    pub fn add(self, other: EventCounts) -> EventCounts {
        EventCounts {
            diffuse: self.diffuse + other.diffuse,
            specular: self.specular + other.specular,
            grazing: self.grazing + other.grazing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    /// Position at `t_origin`.
    pub origin: Vector,
    pub velocity: Vector,
    pub t_origin: f64,
    pub weight: f64,
    /// Word position of the particle's dynamics stream.
    pub word_pos: u128,
    pub events: EventCounts,
    /// Exit time for absorbed particles.
    pub death_time: Option<f64>,
}

impl Particle {
    pub fn new(state: PhaseState, weight: f64, clock: f64) -> Self {
        Particle {
            origin: state.x,
            velocity: state.v,
            t_origin: clock,
            weight,
            word_pos: 0,
            events: EventCounts::default(),
            death_time: None,
        }
    }

    pub fn position(&self, t: f64) -> Vector {
        self.origin + self.velocity * (t - self.t_origin)
    }

    pub fn state(&self, t: f64) -> PhaseState {
        PhaseState {
            x: self.position(t),
            v: self.velocity,
        }
    }

    pub fn alive(&self) -> bool {
        self.death_time.is_none()
    }
}

/// Weighted empirical measure on phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub dim: usize,
    pub clock: f64,
    pub seed: u64,
    /// Global index of `particles[0]`; selects the random streams.
    #[serde(default)]
    pub first_index: usize,
    pub particles: Vec<Particle>,
}

/// A rayon pool with exactly `workers` threads.
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param("run.workers", e.to_string()))
}

impl Ensemble {
    /// Draws `n` particles of mass `1/n` each; particle `i` uses stream `2i`.
    pub fn sample(data: &InitialData, domain: &Domain, n: usize, seed: u64) -> Result<Self> {
        Self::sample_range(data, domain, 0..n, n, seed)
    }

    /// Particles `range` of an `n_total`-particle ensemble; chunks drawn this
    /// way reproduce the corresponding slice of [`Ensemble::sample`].
    pub fn sample_range(
        data: &InitialData,
        domain: &Domain,
        range: std::ops::Range<usize>,
        n_total: usize,
        seed: u64,
    ) -> Result<Self> {
        data.validate(domain)?;
        if range.is_empty() || range.end > n_total {
            return Err(Error::EmptyEnsemble);
        }
        let weight = 1.0 / n_total as f64;
        let first_index = range.start;
        let particles = range
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_at(seed, init_stream_id(i), 0);
                data.sample(domain, &mut rng).map(|s| Particle::new(s, weight, 0.0))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble {
            dim: domain.dim(),
            clock: 0.0,
            seed,
            first_index,
            particles,
        })
    }

    /// Ensemble from explicit states with equal weights summing to `mass`.
    pub fn from_states(dim: usize, states: &[PhaseState], mass: f64, seed: u64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let w = mass / states.len() as f64;
        Ok(Ensemble {
            dim,
            clock: 0.0,
            seed,
            first_index: 0,
            particles: states.iter().map(|s| Particle::new(*s, w, 0.0)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Total statistical weight, by pairwise summation in index order.
    pub fn total_mass(&self) -> f64 {
        let w: Vec<f64> = self.particles.iter().map(|p| p.weight).collect();
        pairwise_sum(&w)
    }

    pub fn states(&self) -> Vec<PhaseState> {
        self.particles.iter().map(|p| p.state(self.clock)).collect()
    }

    pub fn event_totals(&self) -> EventCounts {
        self.particles.iter().fold(EventCounts::default(), |a, p| a.add(p.events))
    }

    /// Evolves the reflecting problem by `dt` on the current rayon pool.
    pub fn advance(&mut self, dt: f64, domain: &Domain, wall: &WallModel) -> Result<()> {
        self.advance_with_limit(dt, domain, wall, MAX_EVENTS)
    }

    pub fn advance_with_limit(&mut self, dt: f64, domain: &Domain, wall: &WallModel, max_events: u64) -> Result<()> {
        if !(dt >= 0.0) {
            return Err(Error::param("dt", "must be nonnegative"));
        }
        if dt == 0.0 {
            return Ok(());
        }
        let mass = self.total_mass();
        let target = self.clock + dt;
        let seed = self.seed;
        let first = self.first_index;
        let seat = SEAT_OFFSET * domain.bounding_radius();
        let failure = self
            .particles
            .par_iter_mut()
            .enumerate()
            .filter_map(|(i, p)| {
                advance_particle(p, first + i, seed, target, domain, wall, max_events, seat)
                    .err()
                    .map(|e| (i, e))
            })
            .min_by_key(|(i, _)| *i);
        if let Some((_, e)) = failure {
            return Err(e);
        }
        self.clock = target;
        assert_eq!(self.total_mass(), mass, "wall events must not change statistical weights");
        Ok(())
    }

    /// Evolves the absorbing problem by `dt`: particles reaching the wall are
    /// removed (weight set to zero, exit time recorded).
    pub fn absorbing_evolve(&mut self, dt: f64, domain: &Domain) -> Result<()> {
        if !(dt >= 0.0) {
            return Err(Error::param("dt", "must be nonnegative"));
        }
        let target = self.clock + dt;
        let failure = self
            .particles
            .par_iter_mut()
            .enumerate()
            .filter_map(|(i, p)| {
                if !p.alive() {
                    return None;
                }
                match domain.exit_time(&p.origin, &p.velocity) {
                    Ok(sigma) => {
                        if p.t_origin + sigma <= target {
                            p.death_time = Some(p.t_origin + sigma);
                            p.weight = 0.0;
                        }
                        None
                    }
                    Err(e) => Some((i, e)),
                }
            })
            .min_by_key(|(i, _)| *i);
        if let Some((_, e)) = failure {
            return Err(e);
        }
        self.clock = target;
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn advance_particle(
    p: &mut Particle,
    index: usize,
    seed: u64,
    target: f64,
    domain: &Domain,
    wall: &WallModel,
    max_events: u64,
    seat: f64,
) -> Result<()> {
    if !p.alive() {
        return Ok(());
    }
    let mut rng: Option<StreamRng> = None;
    let mut events = 0u64;
    loop {
        let (sigma, point) = match domain.exit(&p.origin, &p.velocity)? {
            Exit::Never => break,
            Exit::Hit { time, point, .. } => (time, point),
        };
        if p.t_origin + sigma > target {
            break;
        }
        events += 1;
        if events > max_events {
            return Err(Error::RunawayEvents {
                index,
                speed: p.velocity.norm(),
                max_events,
            });
        }
        let n = domain.inward_normal(&point)?;
        if p.velocity.dot(&n) >= 0.0 {
            // Numerically tangent hit: keep flying, no kernel event.
            p.events.grazing += 1;
        } else {
            let rng = rng.get_or_insert_with(|| stream_at(seed, dynamics_stream_id(index), p.word_pos));
            let r = wall.apply_boundary(&point, &p.velocity, &n, rng)?;
            p.velocity = r.v;
            if r.diffuse {
                p.events.diffuse += 1;
            } else {
                p.events.specular += 1;
            }
            if r.grazing {
                p.events.grazing += 1;
            }
        }
        p.origin = point + n * seat;
        p.t_origin += sigma;
    }
    if let Some(rng) = rng {
        p.word_pos = rng.get_word_pos();
    }
    Ok(())
}
