//! Coincidence histograms over integer cycle delays and the normalised
//! degree of polarisation correlation.
//!
//! A histogram for the ordered channel pair (first, second) counts, for
//! every delay d in [−D, D], the pairs (first click at cycle i, second click
//! at cycle i + d). Several clicks on one channel within a cycle are paired
//! with every click of the other channel. Zero-delay counts are normalised
//! by the mean of the side peaks, treating all counts as independent Poisson
//! variables.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::events::{Channel, EventRecord, EventStream};

pub const DEFAULT_MAX_DELAY: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub channel_pair: (Channel, Channel),
    pub max_delay: u32,
    /// Index `d + max_delay` holds delay d.
    pub counts: Vec<u64>,
    pub total_cycles: u64,
}

impl CoincidenceHistogram {
    pub fn delays(&self) -> impl Iterator<Item = i64> + '_ {
        let d = self.max_delay as i64;
        -d..=d
    }

    pub fn count(&self, delay: i64) -> u64 {
        let idx = delay + self.max_delay as i64;
        if idx < 0 {
            return 0;
        }
        self.counts.get(idx as usize).copied().unwrap_or(0)
    }

    pub fn zero(&self) -> u64 {
        self.count(0)
    }

    pub fn side_counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.delays().filter(|&d| d != 0).map(|d| self.count(d))
    }

    /// `delay,count` lines with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay,count\n");
        for d in self.delays() {
            out.push_str(&format!("{d},{}\n", self.count(d)));
        }
        out
    }
}

/// Single-pass histogram accumulator holding at most `max_delay + 1` cycles.
#[derive(Debug, Clone)]
pub struct HistogramBuilder {
    pair: (Channel, Channel),
    max_delay: u32,
    counts: Vec<u64>,
    /// Past cycles with (first, second) click counts, oldest first.
    window: VecDeque<(u64, u64, u64)>,
    current: Option<(u64, u64, u64)>,
    last_cycle: Option<u64>,
}

impl HistogramBuilder {
    pub fn new(pair: (Channel, Channel), max_delay: u32) -> Result<Self, Error> {
        if max_delay < 1 {
            return Err(Error::invalid("max_delay", "must be >= 1"));
        }
        Ok(HistogramBuilder {
            pair,
            max_delay,
            counts: vec![0; 2 * max_delay as usize + 1],
            window: VecDeque::with_capacity(max_delay as usize + 1),
            current: None,
            last_cycle: None,
        })
    }

    pub fn push(&mut self, r: EventRecord) -> Result<(), Error> {
        if let Some(prev) = self.last_cycle {
            if r.cycle < prev {
                return Err(Error::invalid(
                    "event stream",
                    format!("cycle index {} after {prev}", r.cycle),
                ));
            }
        }
        self.last_cycle = Some(r.cycle);
        let is_first = r.channel == self.pair.0;
        let is_second = r.channel == self.pair.1;
        if !is_first && !is_second {
            return Ok(());
        }
        match &mut self.current {
            Some((cycle, _, _)) if *cycle == r.cycle => {}
            _ => {
                self.flush();
                self.current = Some((r.cycle, 0, 0));
            }
        }
        let cur = self.current.as_mut().expect("set above");
        if is_first {
            cur.1 += 1;
        }
        if is_second {
            cur.2 += 1;
        }
        Ok(())
    }

    fn flush(&mut self) {
        let Some((cycle, first, second)) = self.current.take() else {
            return;
        };
        let d_max = self.max_delay as u64;
        while let Some(&(old, _, _)) = self.window.front() {
            if cycle - old > d_max {
                self.window.pop_front();
            } else {
                break;
            }
        }
        let zero = self.max_delay as usize;
        for &(old, f_old, s_old) in &self.window {
            let d = (cycle - old) as usize;
            // first earlier, second now: positive delay
            self.counts[zero + d] += f_old * second;
            self.counts[zero - d] += first * s_old;
        }
        self.counts[zero] += first * second;
        self.window.push_back((cycle, first, second));
    }

    pub fn finish(mut self, total_cycles: u64) -> CoincidenceHistogram {
        self.flush();
        CoincidenceHistogram {
            channel_pair: self.pair,
            max_delay: self.max_delay,
            counts: self.counts,
            total_cycles,
        }
    }
}

pub fn histogram(
    ev: &EventStream,
    pair: (Channel, Channel),
    max_delay: u32,
) -> Result<CoincidenceHistogram, Error> {
    let mut b = HistogramBuilder::new(pair, max_delay)?;
    for r in ev.records() {
        b.push(*r)?;
    }
    Ok(b.finish(ev.total_cycles()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCorrelation {
    pub g_zero: f64,
    pub side_mean: f64,
    pub side_count: usize,
    pub poisson_sigma: f64,
}

/// Normalised count at `count` given the side-peak total and number of
/// side peaks, with its first-order Poisson uncertainty.
fn normalised_with_sigma(count: u64, side_total: u64, side_count: usize) -> (f64, f64) {
    let mean = side_total as f64 / side_count as f64;
    let g = count as f64 / mean;
    let var = (count.max(1) as f64) / (mean * mean) + g * g / side_total as f64;
    (g, var.sqrt())
}

pub fn normalize(h: &CoincidenceHistogram) -> Result<NormalizedCorrelation, Error> {
    let side: Vec<u64> = h.side_counts().collect();
    let nonzero = side.iter().filter(|&&c| c > 0).count();
    if nonzero < 2 {
        return Err(Error::Normalization(format!(
            "{}–{} histogram has {nonzero} non-empty side peaks, need at least 2",
            h.channel_pair.0, h.channel_pair.1
        )));
    }
    let total: u64 = side.iter().sum();
    let (g, sigma) = normalised_with_sigma(h.zero(), total, side.len());
    Ok(NormalizedCorrelation {
        g_zero: g,
        side_mean: total as f64 / side.len() as f64,
        side_count: side.len(),
        poisson_sigma: sigma,
    })
}

/// C = (g_co − g_cross)/(g_co + g_cross).
pub fn degree_of_correlation(g_co: f64, g_cross: f64) -> Result<f64, Error> {
    if !(g_co >= 0.0) || !(g_cross >= 0.0) {
        return Err(Error::invalid(
            "normalised coincidences",
            format!("({g_co}, {g_cross}) must be non-negative"),
        ));
    }
    let sum = g_co + g_cross;
    if sum <= 0.0 {
        return Err(Error::ZeroCoincidences);
    }
    Ok((g_co - g_cross) / sum)
}

/// C and its first-order uncertainty from two normalised rates.
pub fn correlation_with_sigma(g_co: (f64, f64), g_cross: (f64, f64)) -> Result<(f64, f64), Error> {
    let c = degree_of_correlation(g_co.0, g_cross.0)?;
    let s = g_co.0 + g_cross.0;
    let dco = 2.0 * g_cross.0 / (s * s);
    let dcross = 2.0 * g_co.0 / (s * s);
    let sigma = ((dco * g_co.1).powi(2) + (dcross * g_cross.1).powi(2)).sqrt();
    Ok((c, sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub delay: i64,
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma: f64,
}

/// XX–XCO and XX–XCROSS histograms built together in one pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelation {
    pub co: CoincidenceHistogram,
    pub cross: CoincidenceHistogram,
}

impl CrossCorrelation {
    pub fn from_records<I>(
        records: I,
        max_delay: u32,
        total_cycles: Option<u64>,
    ) -> Result<Self, Error>
    where
        I: IntoIterator<Item = Result<EventRecord, Error>>,
    {
        let mut co = HistogramBuilder::new((Channel::Xx, Channel::XCo), max_delay)?;
        let mut cross = HistogramBuilder::new((Channel::Xx, Channel::XCross), max_delay)?;
        let mut last = None;
        for r in records {
            let r = r?;
            co.push(r)?;
            cross.push(r)?;
            last = Some(r.cycle);
        }
        let cycles = total_cycles.unwrap_or(last.map_or(0, |c| c + 1));
        Ok(CrossCorrelation {
            co: co.finish(cycles),
            cross: cross.finish(cycles),
        })
    }

    pub fn from_stream(ev: &EventStream, max_delay: u32) -> Result<Self, Error> {
        Self::from_records(
            ev.records().iter().map(|r| Ok(*r)),
            max_delay,
            Some(ev.total_cycles()),
        )
    }

    pub fn point(&self, delay: i64) -> Result<CorrelationPoint, Error> {
        let side = |h: &CoincidenceHistogram| -> Result<(u64, usize), Error> {
            let n = normalize(h)?;
            Ok((h.side_counts().sum(), n.side_count))
        };
        let (co_total, k) = side(&self.co)?;
        let (cross_total, _) = side(&self.cross)?;
        let g_co = normalised_with_sigma(self.co.count(delay), co_total, k);
        let g_cross = normalised_with_sigma(self.cross.count(delay), cross_total, k);
        let (c, sigma) = correlation_with_sigma(g_co, g_cross)?;
        Ok(CorrelationPoint { delay, c, sigma })
    }

    pub fn series(&self) -> Result<Vec<CorrelationPoint>, Error> {
        self.co.delays().map(|d| self.point(d)).collect()
    }
}

/// Degree of correlation against delay from the two simultaneously
/// recorded histograms of one stream.
pub fn correlation_vs_delay(
    ev: &EventStream,
    max_delay: u32,
) -> Result<Vec<CorrelationPoint>, Error> {
    CrossCorrelation::from_stream(ev, max_delay)?.series()
}

pub fn series_to_csv(points: &[CorrelationPoint]) -> String {
    let mut out = String::from("delay,C,sigma\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.delay, p.c, p.sigma));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stream(recs: &[(u64, Channel)]) -> EventStream {
        EventStream::new(
            recs.iter()
                .map(|&(c, ch)| EventRecord::new(c, ch))
                .collect(),
            None,
        )
        .unwrap()
    }

    /// Quadratic reference count over all record pairs.
    fn brute_force(ev: &EventStream, pair: (Channel, Channel), d_max: i64) -> Vec<u64> {
        let mut counts = vec![0u64; 2 * d_max as usize + 1];
        for a in ev.records().iter().filter(|r| r.channel == pair.0) {
            for b in ev.records().iter().filter(|r| r.channel == pair.1) {
                let d = b.cycle as i64 - a.cycle as i64;
                if d.abs() <= d_max {
                    counts[(d + d_max) as usize] += 1;
                }
            }
        }
        counts
    }

    fn random_stream(rng: &mut ChaCha8Rng, n: usize) -> EventStream {
        let mut cycle = 0u64;
        let mut recs = Vec::with_capacity(n);
        for _ in 0..n {
            cycle += rng.random_range(0..4);
            recs.push(EventRecord::new(
                cycle,
                Channel::from_code(rng.random_range(0..3)).unwrap(),
            ));
        }
        EventStream::new(recs, None).unwrap()
    }

    #[test]
    fn same_cycle_clicks_land_at_zero() {
        let recs: Vec<_> = (0..50)
            .flat_map(|c| [(c * 3, Channel::Xx), (c * 3, Channel::XCo)])
            .collect();
        let h = histogram(&stream(&recs), (Channel::Xx, Channel::XCo), 2).unwrap();
        assert_eq!(h.zero(), 50);
        assert!(h.side_counts().all(|c| c == 0));
    }

    #[test]
    fn alternating_cycles() {
        let recs: Vec<_> = (0..20)
            .map(|c| {
                (
                    c,
                    if c % 2 == 0 {
                        Channel::Xx
                    } else {
                        Channel::XCo
                    },
                )
            })
            .collect();
        let h = histogram(&stream(&recs), (Channel::Xx, Channel::XCo), 3).unwrap();
        assert_eq!(h.zero(), 0);
        assert!(h.count(1) > 0 && h.count(-1) > 0);
        assert_eq!(h.count(2), 0);
    }

    #[test]
    fn matches_quadratic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let ev = random_stream(&mut rng, 3000);
            for pair in [
                (Channel::Xx, Channel::XCo),
                (Channel::XCo, Channel::XCross),
                (Channel::Xx, Channel::Xx),
            ] {
                let d = rng.random_range(1..12);
                let h = histogram(&ev, pair, d as u32).unwrap();
                assert_eq!(h.counts, brute_force(&ev, pair, d));
            }
        }
    }

    #[test]
    fn order_within_a_cycle_is_irrelevant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ev = random_stream(&mut rng, 2000);
        let mut shuffled = ev.records().to_vec();
        for group in shuffled.chunk_by_mut(|a, b| a.cycle == b.cycle) {
            group.reverse();
        }
        let ev2 = EventStream::new(shuffled, None).unwrap();
        let pair = (Channel::Xx, Channel::XCross);
        assert_eq!(
            histogram(&ev, pair, 5).unwrap(),
            histogram(&ev2, pair, 5).unwrap()
        );
    }

    #[test]
    fn zero_max_delay_is_rejected() {
        assert!(histogram(&stream(&[]), (Channel::Xx, Channel::XCo), 0).is_err());
    }

    fn synthetic(zero: u64, side: u64, d: u32) -> CoincidenceHistogram {
        let mut counts = vec![side; 2 * d as usize + 1];
        counts[d as usize] = zero;
        CoincidenceHistogram {
            channel_pair: (Channel::Xx, Channel::XCo),
            max_delay: d,
            counts,
            total_cycles: 1000,
        }
    }

    #[test]
    fn normalize_arithmetic() {
        let n = normalize(&synthetic(50, 100, 5)).unwrap();
        assert_eq!(n.g_zero, 0.5);
        assert_eq!(n.side_count, 10);
        assert_eq!(n.side_mean, 100.0);
        assert!(n.poisson_sigma > 0.0);
        let expected = 0.5 * (1.0 / 50.0 + 1.0 / 1000.0f64).sqrt();
        assert!((n.poisson_sigma - expected).abs() < 1e-15);
    }

    #[test]
    fn flat_histogram_is_unity() {
        let n = normalize(&synthetic(400, 400, 10)).unwrap();
        assert!((n.g_zero - 1.0).abs() <= 3.0 * n.poisson_sigma);
    }

    #[test]
    fn normalize_needs_side_peaks() {
        assert!(matches!(
            normalize(&synthetic(5, 0, 4)),
            Err(Error::Normalization(_))
        ));
        let mut h = synthetic(5, 0, 4);
        h.counts[0] = 3;
        assert!(normalize(&h).is_err());
        h.counts[8] = 1;
        assert!(normalize(&h).is_ok());
    }

    #[test]
    fn degree_of_correlation_examples() {
        assert!((degree_of_correlation(1.7, 0.3).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(degree_of_correlation(0.8, 0.8).unwrap(), 0.0);
        assert!(matches!(
            degree_of_correlation(0.0, 0.0),
            Err(Error::ZeroCoincidences)
        ));
        assert!(degree_of_correlation(-0.1, 1.0).is_err());
    }

    #[test]
    fn correlation_sigma_matches_binomial_form() {
        // Equal side means: σ_C² → 4·n_co·n_cross/(n_co + n_cross)³ as side totals grow.
        let (n_co, n_x) = (850u64, 150u64);
        let big = 1_000_000_000u64;
        let g_co = normalised_with_sigma(n_co, big, 10);
        let g_x = normalised_with_sigma(n_x, big, 10);
        let (c, s) = correlation_with_sigma(g_co, g_x).unwrap();
        assert!((c - 0.7).abs() < 1e-12);
        let expect = (4.0 * 850.0 * 150.0 / 1000f64.powi(3)).sqrt();
        assert!((s - expect).abs() / expect < 1e-4);
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn c_is_bounded_and_antisymmetric(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            prop_assume!(a + b > 0.0);
            let c = degree_of_correlation(a, b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert_eq!(degree_of_correlation(b, a).unwrap(), -c);
        }
    }
}
