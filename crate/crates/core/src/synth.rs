//! Synthetic event data for tests, benchmarks and demonstrations.
//!
//! Events carry location `x`, `y` in the unit square, an integer `hour`, a
//! five-level ordinal `kind`, a `day` time stamp and a categorical response.
//! Background events are homogeneous; clusters add events concentrated in a
//! box of space and time.

use rand::Rng;

use crate::data::{Frame, Role, Schema, VariableSpec};
use crate::error::{Error, Result};
use crate::rng::stream;

pub const KINDS: [&str; 5] = ["k1", "k2", "k3", "k4", "k5"];

#[derive(Clone, Debug, PartialEq)]
pub struct EventModel {
    pub levels: Vec<String>,
    /// Response level probabilities of background events.
    pub level_probs: Vec<f64>,
    /// Chance that each of `x`, `y`, `hour` is missing.
    pub missing_rate: f64,
}

impl Default for EventModel {
    fn default() -> Self {
        EventModel {
            levels: vec!["other".into(), "suspicious".into()],
            level_probs: vec![0.7, 0.3],
            missing_rate: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub n: usize,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub days: (f64, f64),
    pub level_probs: Vec<f64>,
}

impl Cluster {
    /// `n` events in the corner box `[0.8, 1]^2` over the given days, 30/70 mix.
    pub fn corner(n: usize, days: (f64, f64)) -> Self {
        Cluster {
            n,
            x: (0.8, 1.0),
            y: (0.8, 1.0),
            days,
            level_probs: vec![0.3, 0.7],
        }
    }
}

impl EventModel {
    pub fn schema(&self) -> Schema {
        Schema::new(vec![
            VariableSpec::numeric("x", Role::Predictor),
            VariableSpec::numeric("y", Role::Predictor),
            VariableSpec::numeric("hour", Role::Predictor),
            VariableSpec::ordinal("kind", KINDS, Role::Predictor),
            VariableSpec::numeric("day", Role::Time),
            VariableSpec::ordinal("response", self.levels.clone(), Role::Response),
        ])
        .expect("synthetic schema is valid")
    }

    fn check(&self, probs: &[f64]) -> Result<()> {
        let sum: f64 = probs.iter().sum();
        if probs.len() != self.levels.len() || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::precondition(
                "level probabilities must match the levels and sum to 1",
            ));
        }
        Ok(())
    }

    /// `sizes[g]` background events in group `g`, days uniform in `days`.
    pub fn groups(&self, sizes: &[usize], days: (f64, f64), seed: u64) -> Result<Frame> {
        self.check(&self.level_probs)?;
        let mut rng = stream(seed, 0);
        let mut b = Builder::default();
        for (g, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                b.push(self.background(&mut rng, days), g as u32);
            }
        }
        b.finish(self, labels(sizes.len()))
    }

    /// A single-group event stream at `rate` events per day over
    /// `[0, total_days)`, plus clusters, ordered by day.
    pub fn stream(
        &self,
        total_days: f64,
        rate: f64,
        clusters: &[Cluster],
        seed: u64,
    ) -> Result<Frame> {
        self.check(&self.level_probs)?;
        let mut rng = stream(seed, 0);
        let n = (total_days * rate).round() as usize;
        let mut events: Vec<Event> = (0..n)
            .map(|_| self.background(&mut rng, (0.0, total_days)))
            .collect();
        for c in clusters {
            self.check(&c.level_probs)?;
            events.extend((0..c.n).map(|_| self.clustered(&mut rng, c)));
        }
        events.sort_by(|a, b| a.day.total_cmp(&b.day));
        let mut b = Builder::default();
        for e in events {
            b.push(e, 0);
        }
        b.finish(self, vec!["all".into()])
    }

    /// Appends cluster events to group `group` of `frame`.
    pub fn inject(&self, frame: &Frame, cluster: &Cluster, group: u32, seed: u64) -> Result<Frame> {
        self.check(&cluster.level_probs)?;
        let mut rng = stream(seed, 1);
        let mut b = Builder::default();
        for _ in 0..cluster.n {
            b.push(self.clustered(&mut rng, cluster), group);
        }
        let extra = b.finish(self, frame.group_labels().to_vec())?;
        Frame::concat(&[frame.clone(), extra])
    }

    fn background<R: Rng>(&self, rng: &mut R, days: (f64, f64)) -> Event {
        let (x, y, hour) = (
            rng.random::<f64>(),
            rng.random::<f64>(),
            rng.random_range(0..24) as f64,
        );
        Event {
            x: self.maybe(rng, x),
            y: self.maybe(rng, y),
            hour: self.maybe(rng, hour),
            kind: rng.random_range(1..=KINDS.len()) as f64,
            day: draw_day(rng, days),
            level: draw_level(rng, &self.level_probs),
        }
    }

    fn clustered<R: Rng>(&self, rng: &mut R, c: &Cluster) -> Event {
        Event {
            x: rng.random_range(c.x.0..c.x.1),
            y: rng.random_range(c.y.0..c.y.1),
            hour: rng.random_range(0..24) as f64,
            kind: rng.random_range(1..=KINDS.len()) as f64,
            day: draw_day(rng, c.days),
            level: draw_level(rng, &c.level_probs),
        }
    }

    fn maybe<R: Rng>(&self, rng: &mut R, v: f64) -> f64 {
        if self.missing_rate > 0.0 && rng.random::<f64>() < self.missing_rate {
            f64::NAN
        } else {
            v
        }
    }
}

fn labels(d: usize) -> Vec<String> {
    (1..=d).map(|g| format!("g{g}")).collect()
}

fn draw_day<R: Rng>(rng: &mut R, days: (f64, f64)) -> f64 {
    (days.0 + rng.random::<f64>() * (days.1 - days.0))
        .floor()
        .min(days.1 - 1.0)
        .max(days.0)
}

fn draw_level<R: Rng>(rng: &mut R, probs: &[f64]) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u32;
        }
    }
    probs.len() as u32 - 1
}

struct Event {
    x: f64,
    y: f64,
    hour: f64,
    kind: f64,
    day: f64,
    level: u32,
}

#[derive(Default)]
struct Builder {
    cols: [Vec<f64>; 5],
    response: Vec<u32>,
    groups: Vec<u32>,
}

impl Builder {
    fn push(&mut self, e: Event, group: u32) {
        for (col, v) in self.cols.iter_mut().zip([e.x, e.y, e.hour, e.kind, e.day]) {
            col.push(v);
        }
        self.response.push(e.level);
        self.groups.push(group);
    }

    fn finish(self, model: &EventModel, group_labels: Vec<String>) -> Result<Frame> {
        let mut columns: Vec<Vec<f64>> = self.cols.into_iter().collect();
        columns.push(Vec::new());
        Frame::new(
            model.schema(),
            columns,
            self.response,
            self.groups,
            group_labels,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_have_requested_sizes() {
        let f = EventModel::default()
            .groups(&[30, 50], (0.0, 365.0), 1)
            .unwrap();
        assert_eq!(f.group_sizes(), vec![30, 50]);
        assert!(f.time().unwrap().iter().all(|&t| (0.0..365.0).contains(&t)));
    }

    #[test]
    fn stream_is_sorted_and_includes_cluster() {
        let m = EventModel::default();
        let c = Cluster::corner(40, (500.0, 530.0));
        let f = m.stream(1000.0, 0.5, &[c], 3).unwrap();
        assert_eq!(f.n_rows(), 540);
        let t = f.time().unwrap();
        assert!(t.windows(2).all(|w| w[0] <= w[1]));
        let in_box = (0..f.n_rows())
            .filter(|&r| {
                f.value(r, 0) >= 0.8 && f.value(r, 1) >= 0.8 && (500.0..530.0).contains(&t[r])
            })
            .count();
        assert!(in_box >= 40);
    }

    #[test]
    fn missing_rate_produces_missing_cells() {
        let m = EventModel {
            missing_rate: 0.2,
            ..EventModel::default()
        };
        let f = m.groups(&[200, 200], (0.0, 10.0), 9).unwrap();
        let missing = (0..f.n_rows()).filter(|&r| f.is_missing(r, 0)).count();
        assert!(missing > 40 && missing < 120, "{missing}");
    }
}
