//! Section crossings with linear interpolation between samples.

use serde::{Deserialize, Serialize};

use crate::model::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Both,
}

/// Level sets of one state coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    UCrosses(f64),
    VCrosses(f64),
}

impl Section {
    fn offset(&self, s: &State) -> f64 {
        match *self {
            Section::UCrosses(level) => s.u - level,
            Section::VCrosses(level) => s.v - level,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub section: Section,
    pub direction: Direction,
}

impl EventSpec {
    pub fn new(section: Section, direction: Direction) -> Self {
        Self { section, direction }
    }

    pub fn u_up(level: f64) -> Self {
        Self::new(Section::UCrosses(level), Direction::Up)
    }

    pub fn v_up(level: f64) -> Self {
        Self::new(Section::VCrosses(level), Direction::Up)
    }

    pub fn is_valid(&self) -> bool {
        match self.section {
            Section::UCrosses(x) | Section::VCrosses(x) => x.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub state: State,
    pub direction: Direction,
}

/// Streaming detector. An upward crossing is a step with the offset going
/// from `<= 0` to `> 0`; downward is `>= 0` to `< 0`.
#[derive(Debug, Clone)]
pub struct CrossingDetector {
    spec: EventSpec,
    prev: Option<(f64, State, f64)>,
}

impl CrossingDetector {
    pub fn new(spec: EventSpec) -> Self {
        Self { spec, prev: None }
    }

    pub fn spec(&self) -> &EventSpec {
        &self.spec
    }

    pub fn push(&mut self, t: f64, s: State) -> Option<Event> {
        let g = self.spec.section.offset(&s);
        let event = self.prev.and_then(|(t0, s0, g0)| {
            let dir = if g0 <= 0.0 && g > 0.0 {
                Direction::Up
            } else if g0 >= 0.0 && g < 0.0 {
                Direction::Down
            } else {
                return None;
            };
            if self.spec.direction != Direction::Both && self.spec.direction != dir {
                return None;
            }
            let w = -g0 / (g - g0);
            Some(Event {
                t: t0 + w * (t - t0),
                state: State::new(s0.u + w * (s.u - s0.u), s0.v + w * (s.v - s0.v)),
                direction: dir,
            })
        });
        self.prev = Some((t, s, g));
        event
    }
}

/// All crossings of `spec` along a sampled path.
pub fn detect_events(times: &[f64], states: &[State], spec: EventSpec) -> Vec<Event> {
    let mut det = CrossingDetector::new(spec);
    times
        .iter()
        .zip(states)
        .filter_map(|(&t, &s)| det.push(t, s))
        .collect()
}
