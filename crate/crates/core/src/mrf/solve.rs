use super::model::argmin;
use super::{EnergyModel, MrfError};
use crate::image::LabelField;
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    Raster,
    /// Pixels with even `x + y` first, then odd. Same-colored pixels share no
    /// edge, so each half-sweep is a batch of independent best responses.
    Checkerboard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub decay: f64,
    pub sweeps_per_t: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self { t0: 2.0, decay: 0.9, sweeps_per_t: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConfig {
    pub order: SweepOrder,
    pub max_sweeps: usize,
    pub schedule: AnnealSchedule,
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self { order: SweepOrder::Raster, max_sweeps: 60, schedule: AnnealSchedule::default(), seed: 0 }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), MrfError> {
        let s = &self.schedule;
        if !(s.t0 > 0.0 && s.t0.is_finite()) {
            return Err(MrfError::BadConfig("initial temperature must be > 0"));
        }
        if !(s.decay > 0.0 && s.decay < 1.0) {
            return Err(MrfError::BadConfig("decay must lie strictly inside (0, 1)"));
        }
        if s.sweeps_per_t == 0 {
            return Err(MrfError::BadConfig("sweeps per temperature must be >= 1"));
        }
        Ok(())
    }
}

/// One row of a solver trace. Row 0 describes the initial labeling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub sweep: usize,
    pub energy: f64,
    pub changed: usize,
    /// 0 for deterministic best-response sweeps.
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub labels: LabelField,
    pub trace: Vec<TraceRow>,
    /// True when the final sweep changed nothing.
    pub converged: bool,
}

impl SolveOutcome {
    pub fn energy(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.energy)
    }
}

pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("sweep,energy,changed,temperature\n");
    for r in trace {
        out.push_str(&format!("{},{},{},{}\n", r.sweep, r.energy, r.changed, r.temperature));
    }
    out
}

/// Best response of one pixel: keep the current label when it is already
/// optimal, otherwise the lowest-index label of minimal local energy.
#[inline]
fn best_response(energies: &[f64], current: usize) -> usize {
    let best = argmin(energies);
    if energies[current] <= energies[best] {
        current
    } else {
        best
    }
}

fn sweep_in_place(model: &EnergyModel, labels: &mut [usize], order: SweepOrder) -> usize {
    let l = model.label_count();
    let mut changed = 0;
    match order {
        SweepOrder::Raster => {
            let mut buf = vec![0.0; l];
            for p in 0..labels.len() {
                model.local_energies(labels, p, &mut buf);
                let next = best_response(&buf, labels[p]);
                if next != labels[p] {
                    labels[p] = next;
                    changed += 1;
                }
            }
        }
        SweepOrder::Checkerboard => {
            let w = model.width();
            for color in 0..2 {
                let sites: Vec<usize> = (0..labels.len()).filter(|p| (p % w + p / w) % 2 == color).collect();
                let frozen: &[usize] = labels;
                let updates = par::map_slice(&sites, |&p| {
                    let mut buf = vec![0.0; l];
                    model.local_energies(frozen, p, &mut buf);
                    best_response(&buf, frozen[p])
                });
                for (&p, next) in sites.iter().zip(updates) {
                    if next != labels[p] {
                        labels[p] = next;
                        changed += 1;
                    }
                }
            }
        }
    }
    changed
}

/// One pass of sequential best responses. Never increases the energy.
pub fn best_response_sweep(
    model: &EnergyModel,
    labels: &LabelField,
    order: SweepOrder,
) -> Result<(LabelField, usize), MrfError> {
    model.check_labels(labels)?;
    let mut raw = labels.labels().to_vec();
    let changed = sweep_in_place(model, &mut raw, order);
    let out = LabelField::new(labels.width(), labels.height(), labels.label_count(), raw)?;
    Ok((out, changed))
}

fn icm_loop(
    model: &EnergyModel,
    labels: &mut [usize],
    order: SweepOrder,
    max_sweeps: usize,
    trace: &mut Vec<TraceRow>,
) -> bool {
    let mut sweep = trace.last().map_or(0, |r| r.sweep);
    let mut done = 0;
    loop {
        if done >= max_sweeps {
            return false;
        }
        let changed = sweep_in_place(model, labels, order);
        sweep += 1;
        done += 1;
        trace.push(TraceRow { sweep, energy: model.energy_unchecked(labels), changed, temperature: 0.0 });
        if changed == 0 {
            return true;
        }
    }
}

/// Data-only best responses: each pixel's cheapest label, or `preferred`
/// when it ties for cheapest.
pub fn initial_labeling(model: &EnergyModel, preferred: Option<usize>) -> Result<LabelField, MrfError> {
    let data = model.data();
    let labels = (0..model.pixel_count())
        .map(|p| {
            let best = data.argmin(p);
            match preferred {
                Some(q) if q < data.labels() && data.get(p, q) <= data.get(p, best) => q,
                _ => best,
            }
        })
        .collect();
    Ok(LabelField::new(model.width(), model.height(), model.label_count(), labels)?)
}

/// Iterated best responses until no pixel moves or `max_sweeps` is hit.
pub fn solve_icm(model: &EnergyModel, init: &LabelField, config: &GameConfig) -> Result<SolveOutcome, MrfError> {
    model.check_labels(init)?;
    let mut raw = init.labels().to_vec();
    let mut trace = vec![TraceRow { sweep: 0, energy: model.energy_unchecked(&raw), changed: 0, temperature: 0.0 }];
    let converged = icm_loop(model, &mut raw, config.order, config.max_sweeps, &mut trace);
    let labels = LabelField::new(init.width(), init.height(), init.label_count(), raw)?;
    Ok(SolveOutcome { labels, trace, converged })
}

// Best responses terminate on their own; the cap only guards against
// pathological floating-point cycles.
const POLISH_SWEEP_CAP: usize = 100_000;

fn conditional_into(model: &EnergyModel, labels: &[usize], pixel: usize, temperature: f64, out: &mut [f64]) {
    model.local_energies(labels, pixel, out);
    let min = out.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for e in out.iter_mut() {
        *e = (-(*e - min) / temperature).exp();
        total += *e;
    }
    for e in out.iter_mut() {
        *e /= total;
    }
}

/// Gibbs conditional `P(l) ∝ exp(-E_local(l) / T)` at one pixel.
pub fn site_conditional(
    model: &EnergyModel,
    labels: &LabelField,
    pixel: usize,
    temperature: f64,
) -> Result<Vec<f64>, MrfError> {
    model.check_labels(labels)?;
    if !(temperature > 0.0) {
        return Err(MrfError::BadConfig("temperature must be > 0"));
    }
    let mut out = vec![0.0; model.label_count()];
    conditional_into(model, labels.labels(), pixel, temperature, &mut out);
    Ok(out)
}

fn sample(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Simulated annealing with single-site Gibbs resampling in raster order.
///
/// The temperature is multiplied by `decay` after every `sweeps_per_t`
/// sweeps, for `max_sweeps` sweeps. Both the last sample and the
/// lowest-energy sample seen are then polished by best responses to
/// convergence; the lower of the two is returned, so the output is always a
/// Nash labeling.
pub fn solve_anneal(model: &EnergyModel, init: &LabelField, config: &GameConfig) -> Result<SolveOutcome, MrfError> {
    model.check_labels(init)?;
    config.validate()?;
    let schedule = config.schedule;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut raw = init.labels().to_vec();
    let mut energy = model.energy_unchecked(&raw);
    let mut trace = vec![TraceRow { sweep: 0, energy, changed: 0, temperature: schedule.t0 }];
    let mut best = (energy, raw.clone());
    let mut temperature = schedule.t0;
    let mut probs = vec![0.0; model.label_count()];
    for sweep in 1..=config.max_sweeps {
        let mut changed = 0;
        for p in 0..raw.len() {
            conditional_into(model, &raw, p, temperature, &mut probs);
            let next = sample(&probs, rng.gen::<f64>());
            if next != raw[p] {
                raw[p] = next;
                changed += 1;
            }
        }
        energy = model.energy_unchecked(&raw);
        trace.push(TraceRow { sweep, energy, changed, temperature });
        if energy < best.0 {
            best = (energy, raw.clone());
        }
        if sweep % schedule.sweeps_per_t == 0 {
            temperature *= schedule.decay;
        }
    }
    let mut converged = icm_loop(model, &mut raw, SweepOrder::Raster, POLISH_SWEEP_CAP, &mut trace);
    let mut best_labels = best.1;
    let mut side_trace = vec![TraceRow { sweep: 0, energy: best.0, changed: 0, temperature: 0.0 }];
    let best_converged = icm_loop(model, &mut best_labels, SweepOrder::Raster, POLISH_SWEEP_CAP, &mut side_trace);
    let polished_best = side_trace.last().expect("non-empty").energy;
    if polished_best < model.energy_unchecked(&raw) {
        raw = best_labels;
        converged = best_converged;
        let sweep = trace.last().expect("non-empty").sweep + 1;
        trace.push(TraceRow { sweep, energy: polished_best, changed: 0, temperature: 0.0 });
    }
    let labels = LabelField::new(init.width(), init.height(), init.label_count(), raw)?;
    Ok(SolveOutcome { labels, trace, converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NashReport {
    pub is_nash: bool,
    /// First pixel in raster order with a strictly improving deviation, and
    /// its best response.
    pub witness: Option<(usize, usize)>,
}

/// Whether any single pixel can strictly lower the total energy alone.
pub fn nash_check(model: &EnergyModel, labels: &LabelField) -> Result<NashReport, MrfError> {
    model.check_labels(labels)?;
    let raw = labels.labels();
    let mut buf = vec![0.0; model.label_count()];
    for p in 0..raw.len() {
        model.local_energies(raw, p, &mut buf);
        let next = best_response(&buf, raw[p]);
        if next != raw[p] {
            return Ok(NashReport { is_nash: false, witness: Some((p, next)) });
        }
    }
    Ok(NashReport { is_nash: true, witness: None })
}

/// Largest number of labelings [`exhaustive_oracle`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;

fn decode(mut index: u64, labels: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = (index % labels as u64) as usize;
        index /= labels as u64;
    }
}

/// Global minimizer by enumeration. Pixel 0 is the most significant digit,
/// so the first strict minimum found is the lexicographically smallest.
pub fn exhaustive_oracle(model: &EnergyModel) -> Result<(LabelField, f64), MrfError> {
    let (l, n) = (model.label_count(), model.pixel_count());
    let total = u32::try_from(n)
        .ok()
        .and_then(|n| (l as u64).checked_pow(n))
        .filter(|&t| t <= EXHAUSTIVE_LIMIT)
        .ok_or(MrfError::TooLarge { labels: l, pixels: n })?;
    const CHUNKS: u64 = 64;
    let chunk = total.div_ceil(CHUNKS);
    let partial = par::map_range(CHUNKS as usize, |c| {
        let start = c as u64 * chunk;
        let end = (start + chunk).min(total);
        let mut raw = vec![0usize; n];
        let mut best: Option<(f64, u64)> = None;
        for index in start..end {
            decode(index, l, &mut raw);
            let e = model.energy_unchecked(&raw);
            if best.map_or(true, |(b, _)| e < b) {
                best = Some((e, index));
            }
        }
        best
    });
    let (energy, index) = partial
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(f64, u64)>, cand| match acc {
            Some(a) if a.0 <= cand.0 => Some(a),
            _ => Some(cand),
        })
        .expect("at least one labeling");
    let mut raw = vec![0usize; n];
    decode(index, l, &mut raw);
    Ok((LabelField::new(model.width(), model.height(), l, raw)?, energy))
}
