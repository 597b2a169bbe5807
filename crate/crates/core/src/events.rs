//! Cycle-tagged detector clicks and their Monte Carlo generation.
//!
//! Three detectors: `XX` behind the biexciton polariser, `XCO` and `XCROSS`
//! on the two outputs of the exciton arm's analysing beam splitter.
//!
//! Randomness comes from ChaCha8 seeded with the run seed. Cycles are cut
//! into blocks of [`BLOCK_CYCLES`]; block k draws from stream k, so the
//! output does not depend on how many threads generate it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{background_ratio, emitted_state, DetectionConfig, DotParams};
use crate::density::DensityMatrix;
use crate::error::Error;
use crate::polarization::{identity2, projector, tensor, PolVector, Subsystem};

pub const BLOCK_CYCLES: u64 = 1 << 16;

/// Stream-id offset separating autocorrelation runs from cross-correlation runs.
const AUTOCORRELATION_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "XX")]
    Xx,
    #[serde(rename = "XCO")]
    XCo,
    #[serde(rename = "XCROSS")]
    XCross,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Xx, Channel::XCo, Channel::XCross];

    pub fn label(self) -> &'static str {
        match self {
            Channel::Xx => "XX",
            Channel::XCo => "XCO",
            Channel::XCross => "XCROSS",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Channel::Xx => 0,
            Channel::XCo => 1,
            Channel::XCross => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Channel> {
        match code {
            0 => Some(Channel::Xx),
            1 => Some(Channel::XCo),
            2 => Some(Channel::XCross),
            _ => None,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "XX" => Ok(Channel::Xx),
            "XCO" => Ok(Channel::XCo),
            "XCROSS" => Ok(Channel::XCross),
            other => Err(Error::invalid(
                "channel",
                format!("unknown label {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventRecord {
    pub cycle: u64,
    pub channel: Channel,
}

impl EventRecord {
    pub fn new(cycle: u64, channel: Channel) -> Self {
        EventRecord { cycle, channel }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    records: Vec<EventRecord>,
    /// Known for simulated streams; files carry no header.
    header: Option<DetectionConfig>,
}

impl EventStream {
    /// Fails if cycle indices decrease.
    pub fn new(records: Vec<EventRecord>, header: Option<DetectionConfig>) -> Result<Self, Error> {
        if let Some(pos) = records.windows(2).position(|w| w[1].cycle < w[0].cycle) {
            return Err(Error::invalid(
                "event stream",
                format!(
                    "cycle index decreases at record {} ({} after {})",
                    pos + 1,
                    records[pos + 1].cycle,
                    records[pos].cycle
                ),
            ));
        }
        Ok(EventStream { records, header })
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn header(&self) -> Option<&DetectionConfig> {
        self.header.as_ref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of cycles covered: from the header if present, else last index + 1.
    pub fn total_cycles(&self) -> u64 {
        match (&self.header, self.records.last()) {
            (Some(h), _) => h.cycles,
            (None, Some(last)) => last.cycle + 1,
            (None, None) => 0,
        }
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.records.iter().filter(|r| r.channel == channel).count()
    }
}

/// Per-cycle outcome probabilities for one pair: (XX passes?, X goes co?).
#[derive(Debug, Clone, Copy)]
struct PairTable {
    /// Cumulative over [(pass, co), (pass, cross), (block, co), (block, cross)].
    cumulative: [f64; 4],
}

impl PairTable {
    fn new(rho: &DensityMatrix, xx: &PolVector, co: &PolVector, cross: &PolVector) -> Self {
        let pass = projector(xx);
        let block = identity2() - pass;
        let probs = [
            rho.expectation(&tensor(&pass, &projector(co))).re,
            rho.expectation(&tensor(&pass, &projector(cross))).re,
            rho.expectation(&tensor(&block, &projector(co))).re,
            rho.expectation(&tensor(&block, &projector(cross))).re,
        ]
        .map(|p| p.max(0.0));
        let total: f64 = probs.iter().sum();
        let mut cumulative = [0.0; 4];
        let mut acc = 0.0;
        for (slot, p) in cumulative.iter_mut().zip(probs) {
            acc += p / total;
            *slot = acc;
        }
        cumulative[3] = 1.0;
        PairTable { cumulative }
    }

    fn sample(&self, r: f64) -> (bool, bool) {
        let idx = self.cumulative.iter().position(|&c| r < c).unwrap_or(3);
        (idx < 2, idx % 2 == 0)
    }
}

#[derive(Debug, Clone, Copy)]
struct ClickModel {
    pairs: Option<PairTable>,
    /// Dot photon reaches the X arm but the XX arm is ignored.
    x_only: bool,
    efficiency: f64,
    bg_xx: f64,
    bg_x_each: f64,
}

impl ClickModel {
    fn for_source(p: &DotParams, cfg: &DetectionConfig, x_only: bool) -> Result<Self, Error> {
        p.validate()?;
        cfg.validate()?;
        let b = p.background_fraction;
        let eta = cfg.pair_efficiency;
        let (dot_on, q) = if b >= 1.0 {
            // Background only: keep the single-arm click rate at η.
            (false, eta)
        } else {
            (true, background_ratio(b) * eta)
        };
        if q > 1.0 {
            return Err(Error::invalid(
                "background_fraction",
                format!("needs a background click probability {q:.3} > 1 at efficiency {eta}"),
            ));
        }
        let pairs = if dot_on {
            let rho = emitted_state(&p.without_background())?;
            let (co, cross) = cfg.setting.basis.vectors();
            Some(PairTable::new(&rho, &cfg.setting.xx_vector(), &co, &cross))
        } else {
            None
        };
        Ok(ClickModel {
            pairs,
            x_only,
            efficiency: eta,
            bg_xx: if x_only { 0.0 } else { q },
            bg_x_each: q / 2.0,
        })
    }

    fn run_block(&self, seed: u64, stream: u64, start: u64, end: u64) -> Vec<EventRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut out = Vec::new();
        for cycle in start..end {
            let mut counts = [0u8; 3];
            if let Some(table) = &self.pairs {
                let (pass, co) = table.sample(rng.random());
                let xx_detected = rng.random::<f64>() < self.efficiency;
                let x_detected = rng.random::<f64>() < self.efficiency;
                if pass && xx_detected && !self.x_only {
                    counts[0] += 1;
                }
                if x_detected {
                    counts[if co { 1 } else { 2 }] += 1;
                }
            }
            if rng.random::<f64>() < self.bg_xx {
                counts[0] += 1;
            }
            if rng.random::<f64>() < self.bg_x_each {
                counts[1] += 1;
            }
            if rng.random::<f64>() < self.bg_x_each {
                counts[2] += 1;
            }
            for (channel, n) in Channel::ALL.iter().zip(counts) {
                for _ in 0..n {
                    out.push(EventRecord::new(cycle, *channel));
                }
            }
        }
        out
    }

    fn run(&self, cfg: &DetectionConfig, stream_offset: u64) -> Vec<EventRecord> {
        let blocks = cfg.cycles.div_ceil(BLOCK_CYCLES);
        let parts: Vec<Vec<EventRecord>> = (0..blocks)
            .into_par_iter()
            .map(|k| {
                let start = k * BLOCK_CYCLES;
                let end = (start + BLOCK_CYCLES).min(cfg.cycles);
                self.run_block(cfg.seed, stream_offset + k, start, end)
            })
            .collect();
        parts.concat()
    }
}

/// Cross-correlation click stream for one measurement setting.
///
/// Each cycle the dot emits one pair drawn by the Born rule from the
/// background-free state; each photon is then detected with probability
/// `pair_efficiency`. Background clicks are added independently at the rate
/// that makes their expected share of zero-delay coincidences equal the
/// dot's `background_fraction` (see [`background_ratio`]).
pub fn simulate_events(p: &DotParams, cfg: &DetectionConfig) -> Result<EventStream, Error> {
    let model = ClickModel::for_source(p, cfg, false)?;
    EventStream::new(model.run(cfg, 0), Some(*cfg))
}

/// X-arm-only click stream (`XCO` and `XCROSS`) for the exciton
/// autocorrelation. The dot contributes at most one X photon per cycle, so
/// zero-delay coincidences between the two outputs need background.
pub fn xx_autocorrelation_sim(p: &DotParams, cfg: &DetectionConfig) -> Result<EventStream, Error> {
    let model = ClickModel::for_source(p, cfg, true)?;
    EventStream::new(model.run(cfg, AUTOCORRELATION_STREAM), Some(*cfg))
}

/// Born-rule probabilities (pass&co, pass&cross) normalised over the XX
/// marginal, for statistical checks.
pub fn expected_pair_fractions(rho: &DensityMatrix, cfg: &DetectionConfig) -> (f64, f64) {
    let (co, cross) = cfg.setting.basis.vectors();
    let xx = cfg.setting.xx_vector();
    let pco = rho.joint_probability(&xx, &co);
    let pcross = rho.joint_probability(&xx, &cross);
    let px = (projector(&xx) * rho.reduced(Subsystem::Xx)).trace().re;
    (pco / px, pcross / px)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::{MeasurementSetting, PolLabel, XBasis};

    fn cfg(setting: MeasurementSetting, cycles: u64, eta: f64, seed: u64) -> DetectionConfig {
        DetectionConfig {
            setting,
            cycles,
            pair_efficiency: eta,
            seed,
        }
    }

    /// Fraction of X clicks landing on XCO in cycles that also have an XX click.
    fn co_fraction(ev: &EventStream) -> (f64, usize) {
        let mut co = 0usize;
        let mut total = 0usize;
        for group in ev.records().chunk_by(|a, b| a.cycle == b.cycle) {
            if group.iter().any(|r| r.channel == Channel::Xx) {
                co += group.iter().filter(|r| r.channel == Channel::XCo).count();
                total += group.iter().filter(|r| r.channel != Channel::Xx).count();
            }
        }
        (co as f64 / total as f64, total)
    }

    #[test]
    fn ideal_rectilinear_is_perfectly_correlated() {
        let c = cfg(
            MeasurementSetting::new(PolLabel::H, XBasis::Rectilinear),
            200_000,
            0.5,
            1,
        );
        let ev = simulate_events(&DotParams::ideal(), &c).unwrap();
        let (frac, n) = co_fraction(&ev);
        assert!(n > 10_000);
        assert_eq!(frac, 1.0);
    }

    #[test]
    fn ideal_circular_is_anti_correlated() {
        let c = cfg(
            MeasurementSetting::new(PolLabel::L, XBasis::Circular),
            200_000,
            0.5,
            2,
        );
        let ev = simulate_events(&DotParams::ideal(), &c).unwrap();
        let (frac, _) = co_fraction(&ev);
        assert_eq!(frac, 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let c = cfg(
            MeasurementSetting::new(PolLabel::D, XBasis::Diagonal),
            150_000,
            0.3,
            99,
        );
        let a = simulate_events(&DotParams::measured_dot(), &c).unwrap();
        let b = simulate_events(&DotParams::measured_dot(), &c).unwrap();
        assert_eq!(a, b);
        let other = simulate_events(
            &DotParams::measured_dot(),
            &DetectionConfig { seed: 100, ..c },
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let c = cfg(
            MeasurementSetting::new(PolLabel::H, XBasis::Diagonal),
            300_000,
            0.4,
            5,
        );
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = single.install(|| simulate_events(&DotParams::measured_dot(), &c).unwrap());
        let b = many.install(|| simulate_events(&DotParams::measured_dot(), &c).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn cycle_indices_are_ordered_and_in_range() {
        let c = cfg(
            MeasurementSetting::new(PolLabel::V, XBasis::Rectilinear),
            70_000,
            0.6,
            3,
        );
        let ev = simulate_events(&DotParams::measured_dot(), &c).unwrap();
        assert!(ev.records().windows(2).all(|w| w[0] <= w[1]));
        assert!(ev.records().iter().all(|r| r.cycle < 70_000));
        assert_eq!(ev.total_cycles(), 70_000);
    }

    #[test]
    fn coincidence_probabilities_match_born_rule() {
        // Without background the XX-gated co fraction converges to the Born value.
        let p = DotParams {
            background_fraction: 0.0,
            ..DotParams::measured_dot()
        };
        let rho = emitted_state(&p).unwrap();
        for setting in [
            MeasurementSetting::new(PolLabel::H, XBasis::Rectilinear),
            MeasurementSetting::new(PolLabel::D, XBasis::Diagonal),
            MeasurementSetting::new(PolLabel::L, XBasis::Diagonal),
        ] {
            let c = cfg(setting, 1_000_000, 0.5, 17);
            let ev = simulate_events(&p, &c).unwrap();
            let (frac, n) = co_fraction(&ev);
            let (pco, _) = expected_pair_fractions(&rho, &c);
            let sigma = (pco * (1.0 - pco) / n as f64).sqrt();
            assert!(
                (frac - pco).abs() < 3.0 * sigma,
                "{setting}: {frac} vs {pco} (σ {sigma})"
            );
        }
    }

    #[test]
    fn autocorrelation_without_background_has_no_zero_delay_pairs() {
        let c = cfg(
            MeasurementSetting::new(PolLabel::H, XBasis::Rectilinear),
            200_000,
            0.9,
            4,
        );
        let ev = xx_autocorrelation_sim(&DotParams::ideal(), &c).unwrap();
        assert_eq!(ev.count(Channel::Xx), 0);
        for group in ev.records().chunk_by(|a, b| a.cycle == b.cycle) {
            assert_eq!(group.len(), 1);
        }
    }

    #[test]
    fn background_rate_too_high_is_rejected() {
        let p = DotParams {
            background_fraction: 0.999,
            ..DotParams::ideal()
        };
        let c = cfg(
            MeasurementSetting::new(PolLabel::H, XBasis::Rectilinear),
            10,
            0.9,
            4,
        );
        assert!(simulate_events(&p, &c).is_err());
    }

    #[test]
    fn rejects_decreasing_cycles() {
        let recs = vec![
            EventRecord::new(3, Channel::Xx),
            EventRecord::new(2, Channel::XCo),
        ];
        assert!(EventStream::new(recs, None).is_err());
    }
}
