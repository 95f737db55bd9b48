//! Labeled interleaved pulse-stream simulator.
//!
//! Five PRI modulations are supported: constant, jitter, constant stagger,
//! random stagger and switch & dwell. Per-pulse deviation is uniform in
//! `±deviation_frac` of the nominal PRI. Scenarios follow five cases that
//! differ in allowed modulations, pulse dropouts and how train start and
//! end times line up.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{EmitterId, PulseSequence};

pub const PRI_RANGE_US: (f64, f64) = (1.0, 1000.0);
pub const STAGGER_LEVELS: (usize, usize) = (2, 9);
pub const DWELL_RANGE: (u32, u32) = (4, 10);
pub const PULSE_COUNT_RANGE: (usize, usize) = (5, 100);
pub const MAX_MISSING_PROB: f64 = 0.20;
pub const MAX_CONSECUTIVE_MISSING: usize = 10;
pub const EMITTER_RANGE: (usize, usize) = (1, 10);
pub const NUM_CASES: u8 = 5;

const DATASET_FORMAT: &str = "pulseflow-dataset";
const DATASET_VERSION: u32 = 1;
const MAX_RESAMPLE_ROUNDS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriKind {
    Constant,
    Jitter,
    ConstantStagger,
    RandomStagger,
    SwitchDwell,
}

impl PriKind {
    pub const ALL: [PriKind; 5] = [
        PriKind::Constant,
        PriKind::Jitter,
        PriKind::ConstantStagger,
        PriKind::RandomStagger,
        PriKind::SwitchDwell,
    ];

    /// Largest allowed fractional PRI deviation.
    pub fn max_deviation(self) -> f64 {
        match self {
            PriKind::Constant => 0.01,
            PriKind::Jitter => 0.15,
            _ => 0.40,
        }
    }

    fn single_level(self) -> bool {
        matches!(self, PriKind::Constant | PriKind::Jitter)
    }
}

/// Generative description of one emitter's PRI sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriPattern {
    pub kind: PriKind,
    pub base_pris: Vec<f64>,
    pub deviation_frac: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dwells: Vec<u32>,
}

impl PriPattern {
    pub fn constant(pri: f64) -> Self {
        Self {
            kind: PriKind::Constant,
            base_pris: vec![pri],
            deviation_frac: 0.0,
            dwells: vec![],
        }
    }

    pub fn jitter(pri: f64, deviation_frac: f64) -> Self {
        Self {
            kind: PriKind::Jitter,
            base_pris: vec![pri],
            deviation_frac,
            dwells: vec![],
        }
    }

    pub fn constant_stagger(pris: Vec<f64>, deviation_frac: f64) -> Self {
        Self {
            kind: PriKind::ConstantStagger,
            base_pris: pris,
            deviation_frac,
            dwells: vec![],
        }
    }

    pub fn random_stagger(pris: Vec<f64>, deviation_frac: f64) -> Self {
        Self {
            kind: PriKind::RandomStagger,
            base_pris: pris,
            deviation_frac,
            dwells: vec![],
        }
    }

    pub fn switch_dwell(pris: Vec<f64>, dwells: Vec<u32>, deviation_frac: f64) -> Self {
        Self {
            kind: PriKind::SwitchDwell,
            base_pris: pris,
            deviation_frac,
            dwells,
        }
    }

    /// Structural validity: what generation needs to run.
    pub fn validate(&self) -> Result<()> {
        if self.base_pris.is_empty() {
            return Err(Error::param("pattern needs at least one PRI"));
        }
        if self.base_pris.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::param("PRI values must be positive"));
        }
        if self.kind.single_level() && self.base_pris.len() != 1 {
            return Err(Error::param(format!("{:?} takes exactly one PRI", self.kind)));
        }
        if !(0.0..=self.kind.max_deviation()).contains(&self.deviation_frac) {
            return Err(Error::param(format!(
                "deviation {} outside [0, {}] for {:?}",
                self.deviation_frac,
                self.kind.max_deviation(),
                self.kind
            )));
        }
        if self.kind == PriKind::SwitchDwell {
            if self.dwells.len() != self.base_pris.len() {
                return Err(Error::param("switch & dwell needs one dwell count per PRI"));
            }
            if self.dwells.contains(&0) {
                return Err(Error::param("dwell counts must be positive"));
            }
        }
        Ok(())
    }

    /// The ranges the scenario sampler draws from: PRI in 1..=1000 us,
    /// 2..=9 levels for staggers and switches, dwells in 4..=10.
    pub fn check_simulation_ranges(&self) -> Result<()> {
        self.validate()?;
        let (lo, hi) = PRI_RANGE_US;
        if self.base_pris.iter().any(|p| !(lo..=hi).contains(p)) {
            return Err(Error::param("PRI outside the 1..=1000 us range"));
        }
        if !self.kind.single_level() {
            let l = self.base_pris.len();
            if !(STAGGER_LEVELS.0..=STAGGER_LEVELS.1).contains(&l) {
                return Err(Error::param(format!("{l} levels outside 2..=9")));
            }
        }
        if self
            .dwells
            .iter()
            .any(|d| !(DWELL_RANGE.0..=DWELL_RANGE.1).contains(d))
        {
            return Err(Error::param("dwell count outside 4..=10"));
        }
        Ok(())
    }
}

pub fn generate_pri_sequence<R: Rng + ?Sized>(pattern: &PriPattern, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    if count < 1 {
        return Err(Error::param("PRI count must be at least 1"));
    }
    pattern.validate()?;
    let levels = &pattern.base_pris;
    let mut out = Vec::with_capacity(count);
    let mut dwell_level = 0usize;
    let mut dwell_left = pattern.dwells.first().copied().unwrap_or(0);
    for k in 0..count {
        let nominal = match pattern.kind {
            PriKind::Constant | PriKind::Jitter => levels[0],
            PriKind::ConstantStagger => levels[k % levels.len()],
            PriKind::RandomStagger => levels[rng.gen_range(0..levels.len())],
            PriKind::SwitchDwell => {
                if dwell_left == 0 {
                    dwell_level = (dwell_level + 1) % levels.len();
                    dwell_left = pattern.dwells[dwell_level];
                }
                dwell_left -= 1;
                levels[dwell_level]
            }
        };
        let dev = if pattern.deviation_frac > 0.0 {
            rng.gen_range(-pattern.deviation_frac..=pattern.deviation_frac)
        } else {
            0.0
        };
        out.push(nominal * (1.0 + dev));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub pattern: PriPattern,
    pub start_time: f64,
    pub pulse_count: usize,
    pub missing_prob: f64,
    pub max_consecutive_missing: usize,
}

impl EmitterSpec {
    pub fn new(pattern: PriPattern, start_time: f64, pulse_count: usize) -> Self {
        Self {
            pattern,
            start_time,
            pulse_count,
            missing_prob: 0.0,
            max_consecutive_missing: 1,
        }
    }

    pub fn with_missing(mut self, prob: f64, max_consecutive: usize) -> Self {
        self.missing_prob = prob;
        self.max_consecutive_missing = max_consecutive;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.pattern.validate()?;
        let (lo, hi) = PULSE_COUNT_RANGE;
        if !(lo..=hi).contains(&self.pulse_count) {
            return Err(Error::param(format!(
                "pulse count {} outside {lo}..={hi}",
                self.pulse_count
            )));
        }
        if !(0.0..=MAX_MISSING_PROB).contains(&self.missing_prob) {
            return Err(Error::param(format!(
                "missing probability {} outside [0, {MAX_MISSING_PROB}]",
                self.missing_prob
            )));
        }
        if !(1..=MAX_CONSECUTIVE_MISSING).contains(&self.max_consecutive_missing) {
            return Err(Error::param("max consecutive missing outside 1..=10"));
        }
        if !self.start_time.is_finite() {
            return Err(Error::param("start time must be finite"));
        }
        Ok(())
    }
}

/// One emitter's pulse train, every pulse labeled `label`.
pub fn generate_pulse_train<R: Rng + ?Sized>(spec: &EmitterSpec, label: EmitterId, rng: &mut R) -> Result<PulseSequence> {
    spec.validate()?;
    let mut toas = Vec::with_capacity(spec.pulse_count);
    toas.push(spec.start_time);
    if spec.pulse_count > 1 {
        let pris = generate_pri_sequence(&spec.pattern, spec.pulse_count - 1, rng)?;
        let mut t = spec.start_time;
        for pri in pris {
            t += pri;
            toas.push(t);
        }
    }
    let toas = apply_missing(&toas, spec.missing_prob, spec.max_consecutive_missing, rng);
    let labels = vec![label; toas.len()];
    PulseSequence::labeled(toas, labels)
}

/// Drop pulses. Each pulse may seed a run of deletions whose length is
/// uniform in `1..=max_consecutive`; runs may chain, but never more than
/// `max_consecutive` pulses in a row are removed. The first pulse is kept.
pub fn apply_missing<R: Rng + ?Sized>(toas: &[f64], missing_prob: f64, max_consecutive: usize, rng: &mut R) -> Vec<f64> {
    if toas.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(toas.len());
    out.push(toas[0]);
    if missing_prob <= 0.0 || max_consecutive == 0 {
        out.extend_from_slice(&toas[1..]);
        return out;
    }
    let mut run_left = 0usize;
    let mut consecutive = 0usize;
    for &t in &toas[1..] {
        if consecutive >= max_consecutive {
            run_left = 0;
            consecutive = 0;
            out.push(t);
            continue;
        }
        if run_left == 0 && rng.gen::<f64>() < missing_prob {
            run_left = rng.gen_range(1..=max_consecutive);
        }
        if run_left > 0 {
            run_left -= 1;
            consecutive += 1;
        } else {
            consecutive = 0;
            out.push(t);
        }
    }
    out
}

/// Merge labeled trains by arrival time. Ties go to the lower emitter id,
/// then to the earlier pulse within a train.
pub fn interleave(trains: &[PulseSequence]) -> Result<PulseSequence> {
    if trains.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut ids = Vec::with_capacity(trains.len());
    let mut pulses: Vec<(f64, EmitterId, usize)> = Vec::new();
    for train in trains {
        let labels = train.labels().ok_or(Error::MissingLabels)?;
        let id = labels[0];
        if labels.iter().any(|&l| l != id) {
            return Err(Error::param("each train must carry a single emitter id"));
        }
        if ids.contains(&id) {
            return Err(Error::param(format!("duplicate emitter id {id}")));
        }
        ids.push(id);
        pulses.extend(train.toas().iter().enumerate().map(|(k, &t)| (t, id, k)));
    }
    pulses.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (toas, labels) = pulses.into_iter().map(|(t, id, _)| (t, id)).unzip();
    PulseSequence::labeled(toas, labels)
}

/// A sampled scenario: emitter specs plus what is needed to regenerate the
/// exact same interleaved sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub case_id: u8,
    pub emitters: Vec<EmitterSpec>,
    pub seed: u64,
    /// Per-emitter RNG seeds for the final trains.
    pub train_seeds: Vec<u64>,
    /// Common cut-off when endings are aligned.
    pub end_time: Option<f64>,
}

impl Scenario {
    /// Per-emitter trains, truncated at `end_time` when set.
    pub fn trains(&self) -> Result<Vec<PulseSequence>> {
        self.emitters
            .iter()
            .zip(&self.train_seeds)
            .enumerate()
            .map(|(k, (spec, &seed))| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let train = generate_pulse_train(spec, k as EmitterId, &mut rng)?;
                match self.end_time {
                    Some(end) => truncate(&train, end),
                    None => Ok(train),
                }
            })
            .collect()
    }

    pub fn generate(&self) -> Result<PulseSequence> {
        interleave(&self.trains()?)
    }
}

fn truncate(train: &PulseSequence, end: f64) -> Result<PulseSequence> {
    let keep = train.toas().iter().take_while(|&&t| t <= end).count();
    if keep == 0 {
        return Err(Error::InvalidSequence("train truncated to nothing".into()));
    }
    train.slice(0, keep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Timing {
    /// Close starts, common end.
    Aligned,
    /// Starts spread over a quarter of the span, free ends.
    Spread,
}

struct CaseRules {
    kinds: &'static [PriKind],
    missing: bool,
    timing: Option<Timing>,
}

fn case_rules(case_id: u8) -> Result<CaseRules> {
    const SIMPLE: &[PriKind] = &[PriKind::Constant, PriKind::Jitter];
    Ok(match case_id {
        1 => CaseRules { kinds: SIMPLE, missing: false, timing: Some(Timing::Aligned) },
        2 => CaseRules { kinds: &PriKind::ALL, missing: false, timing: Some(Timing::Aligned) },
        3 => CaseRules { kinds: &PriKind::ALL, missing: true, timing: Some(Timing::Aligned) },
        4 => CaseRules { kinds: &PriKind::ALL, missing: false, timing: Some(Timing::Spread) },
        5 => CaseRules { kinds: &PriKind::ALL, missing: true, timing: None },
        _ => return Err(Error::param(format!("case id {case_id} outside 1..=5"))),
    })
}

fn sample_pattern<R: Rng + ?Sized>(kinds: &[PriKind], rng: &mut R) -> PriPattern {
    let kind = kinds[rng.gen_range(0..kinds.len())];
    let (lo, hi) = PRI_RANGE_US;
    let draw = |rng: &mut R| rng.gen_range(lo..=hi);
    let deviation_frac = rng.gen_range(0.0..=kind.max_deviation());
    match kind {
        PriKind::Constant | PriKind::Jitter => PriPattern {
            kind,
            base_pris: vec![draw(rng)],
            deviation_frac,
            dwells: vec![],
        },
        PriKind::ConstantStagger | PriKind::RandomStagger => {
            let levels = rng.gen_range(STAGGER_LEVELS.0..=STAGGER_LEVELS.1);
            PriPattern {
                kind,
                base_pris: (0..levels).map(|_| draw(rng)).collect(),
                deviation_frac,
                dwells: vec![],
            }
        }
        PriKind::SwitchDwell => {
            let levels = rng.gen_range(STAGGER_LEVELS.0..=STAGGER_LEVELS.1);
            let base_pris = (0..levels).map(|_| draw(rng)).collect();
            let dwells = (0..levels)
                .map(|_| rng.gen_range(DWELL_RANGE.0..=DWELL_RANGE.1))
                .collect();
            PriPattern {
                kind,
                base_pris,
                deviation_frac,
                dwells,
            }
        }
    }
}

fn sample_emitter<R: Rng + ?Sized>(rules: &CaseRules, rng: &mut R) -> EmitterSpec {
    let pattern = sample_pattern(rules.kinds, rng);
    let pulse_count = rng.gen_range(PULSE_COUNT_RANGE.0..=PULSE_COUNT_RANGE.1);
    let spec = EmitterSpec::new(pattern, 0.0, pulse_count);
    if rules.missing {
        spec.with_missing(
            rng.gen_range(0.0..=MAX_MISSING_PROB),
            rng.gen_range(1..=MAX_CONSECUTIVE_MISSING),
        )
    } else {
        spec
    }
}

fn mean_pri(p: &PriPattern) -> f64 {
    match p.kind {
        PriKind::SwitchDwell => {
            let total: f64 = p.base_pris.iter().zip(&p.dwells).map(|(pri, &d)| pri * d as f64).sum();
            total / p.dwells.iter().map(|&d| d as f64).sum::<f64>()
        }
        _ => p.base_pris.iter().sum::<f64>() / p.base_pris.len() as f64,
    }
}

/// Draw a scenario for `case_id` (1..=5).
///
/// Aligned timing starts each train uniformly in `[0, 2 * max base PRI]`
/// and cuts every train at the earliest train end; an emitter left with
/// fewer than five pulses is redrawn. Spread timing starts trains uniformly
/// in `[0, span / 4]` where `span` is the longest nominal train duration.
pub fn sample_scenario<R: Rng + ?Sized>(case_id: u8, rng: &mut R) -> Result<Scenario> {
    let rules = case_rules(case_id)?;
    let seed = rng.next_u64();
    let mut srng = ChaCha8Rng::seed_from_u64(seed);
    let timing = rules.timing.unwrap_or_else(|| {
        if srng.gen_bool(0.5) {
            Timing::Aligned
        } else {
            Timing::Spread
        }
    });
    let k = srng.gen_range(EMITTER_RANGE.0..=EMITTER_RANGE.1);
    let mut emitters: Vec<EmitterSpec> = (0..k).map(|_| sample_emitter(&rules, &mut srng)).collect();
    let mut train_seeds: Vec<u64> = (0..k).map(|_| srng.next_u64()).collect();

    match timing {
        Timing::Spread => {
            let span = emitters
                .iter()
                .map(|e| mean_pri(&e.pattern) * (e.pulse_count - 1) as f64)
                .fold(0.0, f64::max);
            for e in &mut emitters {
                e.start_time = srng.gen_range(0.0..=0.25 * span);
            }
            Ok(Scenario {
                case_id,
                emitters,
                seed,
                train_seeds,
                end_time: None,
            })
        }
        Timing::Aligned => {
            let max_pri = |es: &[EmitterSpec]| {
                es.iter()
                    .flat_map(|e| e.pattern.base_pris.iter().copied())
                    .fold(0.0, f64::max)
            };
            let start_bound = 2.0 * max_pri(&emitters);
            for e in &mut emitters {
                e.start_time = srng.gen_range(0.0..=start_bound);
            }
            for _ in 0..MAX_RESAMPLE_ROUNDS {
                let trains = realize(&emitters, &train_seeds)?;
                let end = trains
                    .iter()
                    .map(|t| *t.toas().last().expect("non-empty"))
                    .fold(f64::INFINITY, f64::min);
                let short: Vec<usize> = trains
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| count_until(t, end) < PULSE_COUNT_RANGE.0)
                    .map(|(i, _)| i)
                    .collect();
                if short.is_empty() {
                    return Ok(Scenario {
                        case_id,
                        emitters,
                        seed,
                        train_seeds,
                        end_time: Some(end),
                    });
                }
                for i in short {
                    let mut e = sample_emitter(&rules, &mut srng);
                    e.start_time = srng.gen_range(0.0..=start_bound);
                    emitters[i] = e;
                    train_seeds[i] = srng.next_u64();
                }
            }
            // Give up on the stragglers: keep emitters that fit the
            // shortest train, which always includes that train itself.
            let trains = realize(&emitters, &train_seeds)?;
            let end = trains
                .iter()
                .map(|t| *t.toas().last().expect("non-empty"))
                .fold(f64::INFINITY, f64::min);
            let keep: Vec<usize> = (0..trains.len())
                .filter(|&i| count_until(&trains[i], end) >= PULSE_COUNT_RANGE.0)
                .collect();
            let keep = if keep.is_empty() {
                // every train lost pulses to dropouts; keep the longest-lived one
                let i = (0..trains.len())
                    .max_by(|&a, &b| trains[a].len().cmp(&trains[b].len()))
                    .expect("k >= 1");
                return Ok(Scenario {
                    case_id,
                    emitters: vec![emitters[i].clone()],
                    seed,
                    train_seeds: vec![train_seeds[i]],
                    end_time: None,
                });
            } else {
                keep
            };
            Ok(Scenario {
                case_id,
                emitters: keep.iter().map(|&i| emitters[i].clone()).collect(),
                seed,
                train_seeds: keep.iter().map(|&i| train_seeds[i]).collect(),
                end_time: Some(end),
            })
        }
    }
}

fn realize(emitters: &[EmitterSpec], seeds: &[u64]) -> Result<Vec<PulseSequence>> {
    emitters
        .iter()
        .zip(seeds)
        .enumerate()
        .map(|(k, (e, &s))| generate_pulse_train(e, k as EmitterId, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect()
}

fn count_until(train: &PulseSequence, end: f64) -> usize {
    train.toas().iter().take_while(|&&t| t <= end).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub count: usize,
    pub seed: u64,
    pub case_mix: Vec<(u8, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub toas: Vec<f64>,
    pub labels: Vec<EmitterId>,
    pub case: u8,
    pub seed: u64,
}

impl DatasetRecord {
    pub fn sequence(&self) -> Result<PulseSequence> {
        PulseSequence::labeled(self.toas.clone(), self.labels.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn case_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.case).or_insert(0) += 1;
        }
        counts
    }
}

/// Parse `"1:1,2:1,3:2"` into `(case, weight)` pairs.
pub fn parse_case_mix(s: &str) -> Result<Vec<(u8, f64)>> {
    let mix = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (c, w) = part
                .split_once(':')
                .ok_or_else(|| Error::param(format!("case mix entry '{part}' is not case:weight")))?;
            let case = c
                .trim()
                .parse::<u8>()
                .map_err(|_| Error::param(format!("bad case id '{c}'")))?;
            let weight = w
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::param(format!("bad weight '{w}'")))?;
            Ok((case, weight))
        })
        .collect::<Result<Vec<_>>>()?;
    validate_case_mix(&mix)?;
    Ok(mix)
}

fn validate_case_mix(mix: &[(u8, f64)]) -> Result<()> {
    if mix.is_empty() {
        return Err(Error::param("case mix is empty"));
    }
    for &(c, w) in mix {
        case_rules(c)?;
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::param(format!("weight for case {c} must be positive")));
        }
    }
    Ok(())
}

/// RNG for record `index` of a dataset: one ChaCha stream per record, so
/// parallel and serial generation agree.
pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn generate_records(case_mix: &[(u8, f64)], count: usize, seed: u64) -> Result<Vec<DatasetRecord>> {
    validate_case_mix(case_mix)?;
    let weights = WeightedIndex::new(case_mix.iter().map(|(_, w)| *w))
        .map_err(|e| Error::param(format!("case mix weights: {e}")))?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = record_rng(seed, i as u64);
            let case = case_mix[weights.sample(&mut rng)].0;
            let scenario = sample_scenario(case, &mut rng)?;
            let (toas, labels) = scenario.generate()?.into_parts();
            Ok(DatasetRecord {
                toas,
                labels: labels.expect("generated sequences are labeled"),
                case,
                seed: scenario.seed,
            })
        })
        .collect()
}

/// Write a dataset: one JSON header line, then one JSON record per line.
pub fn generate_dataset(case_mix: &[(u8, f64)], count: usize, seed: u64, path: &Path) -> Result<Dataset> {
    let records = generate_records(case_mix, count, seed)?;
    let dataset = Dataset {
        header: DatasetHeader {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            count,
            seed,
            case_mix: case_mix.to_vec(),
        },
        records,
    };
    write_dataset(&dataset, path)?;
    Ok(dataset)
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &dataset.header)?;
    w.write_all(b"\n")?;
    for r in &dataset.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: missing header line", path.display())))??;
    let header: DatasetHeader = serde_json::from_str(&header_line)?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset format {} v{}",
            header.format, header.version
        )));
    }
    let mut records = Vec::with_capacity(header.count);
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: DatasetRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("record {k}: {e}")))?;
        if r.toas.len() != r.labels.len() || r.toas.is_empty() {
            return Err(Error::Format(format!("record {k}: toas/labels mismatch")));
        }
        records.push(r);
    }
    if records.len() != header.count {
        return Err(Error::Format(format!(
            "header announces {} records, found {}",
            header.count,
            records.len()
        )));
    }
    Ok(Dataset { header, records })
}
