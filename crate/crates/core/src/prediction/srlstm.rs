//! Recurrent trajectory predictor with a states-refinement layer.
//!
//! Each pedestrian's frame-to-frame displacement is embedded by an affine map
//! and fed to a standard LSTM cell. After every step the cell states are
//! refined with messages from neighbours inside `neighbor_radius`:
//!
//! ```text
//! m_ij = tanh(W_m [h_j ; p_j − p_i] + b_m)
//! s_ij = κ·(h_i · m_ij) + λ·‖p_j − p_i‖²
//! a_ij = softmax_j(s_ij)                  over in-radius neighbours
//! ĉ_i  = c_i + Σ_j a_ij m_ij,   h_i = o_i ⊙ tanh(ĉ_i)
//! ```
//!
//! and a linear decoder maps the hidden state to the next displacement.
//! Prediction is autoregressive: each decoded displacement is the next input.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{Real, Tape};
use super::{PredictedTrajectory, PredictionError};
use crate::scenario::{split_obs_pred, PedestrianTrack, Point2};

pub const CHECKPOINT_SCHEMA: &str = "ecas-srlstm/1";

const INIT_RANGE: f64 = 0.1;
const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub hidden: usize,
    pub embed: usize,
    /// Meters; neighbours farther away do not refine each other.
    pub neighbor_radius: f64,
    pub refinement_layers: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            hidden: 16,
            embed: 8,
            neighbor_radius: 2.0,
            refinement_layers: 1,
        }
    }
}

impl Hyper {
    fn validate(&self) -> Result<(), PredictionError> {
        if self.hidden == 0 || self.embed == 0 {
            return Err(PredictionError::InvalidModel(
                "hidden and embed sizes must be positive".into(),
            ));
        }
        if !(self.neighbor_radius.is_finite() && self.neighbor_radius > 0.0) {
            return Err(PredictionError::InvalidModel("neighbor_radius must be positive".into()));
        }
        if self.refinement_layers == 0 {
            return Err(PredictionError::InvalidModel(
                "refinement_layers must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Offsets of each named tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
struct Layout {
    embed_w: Range<usize>,
    embed_b: Range<usize>,
    lstm_w: Range<usize>,
    lstm_b: Range<usize>,
    msg_w: Range<usize>,
    msg_b: Range<usize>,
    attention: Range<usize>,
    dec_w: Range<usize>,
    dec_b: Range<usize>,
    total: usize,
}

impl Layout {
    fn new(hyper: &Hyper) -> Self {
        let (h, e) = (hyper.hidden, hyper.embed);
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let embed_w = take(e * 2);
        let embed_b = take(e);
        let lstm_w = take(4 * h * (e + h));
        let lstm_b = take(4 * h);
        let msg_w = take(h * (h + 2));
        let msg_b = take(h);
        let attention = take(2);
        let dec_w = take(2 * h);
        let dec_b = take(2);
        Self {
            embed_w,
            embed_b,
            lstm_w,
            lstm_b,
            msg_w,
            msg_b,
            attention,
            dec_w,
            dec_b,
            total: at,
        }
    }

    /// (name, shape, range) for every tensor, in checkpoint order.
    fn tensors(&self, hyper: &Hyper) -> Vec<(&'static str, Vec<usize>, Range<usize>)> {
        let (h, e) = (hyper.hidden, hyper.embed);
        vec![
            ("embed.weight", vec![e, 2], self.embed_w.clone()),
            ("embed.bias", vec![e], self.embed_b.clone()),
            ("lstm.weight", vec![4 * h, e + h], self.lstm_w.clone()),
            ("lstm.bias", vec![4 * h], self.lstm_b.clone()),
            ("refine.message.weight", vec![h, h + 2], self.msg_w.clone()),
            ("refine.message.bias", vec![h], self.msg_b.clone()),
            ("refine.attention", vec![2], self.attention.clone()),
            ("decode.weight", vec![2, h], self.dec_w.clone()),
            ("decode.bias", vec![2], self.dec_b.clone()),
        ]
    }
}

/// Parameters of the predictor, stored as one flat vector.
///
/// LSTM gate rows are ordered input, forget, candidate, output; the input to
/// the gate block is `[embedding ; h]`. `refine.attention` holds the two
/// scalars `κ` (state affinity) and `λ` (squared-distance weight).
#[derive(Debug, Clone, PartialEq)]
pub struct SrLstmModel {
    hyper: Hyper,
    layout_len: usize,
    params: Vec<f64>,
}

impl SrLstmModel {
    /// Uniform(−0.1, 0.1) weights, zero biases, forget-gate bias +1.
    pub fn new(hyper: Hyper, seed: u64) -> Result<Self, PredictionError> {
        let mut model = Self::zeros(hyper)?;
        let layout = Layout::new(&hyper);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for range in [
            &layout.embed_w,
            &layout.lstm_w,
            &layout.msg_w,
            &layout.attention,
            &layout.dec_w,
        ] {
            for w in &mut model.params[range.clone()] {
                *w = rng.gen_range(-INIT_RANGE..INIT_RANGE);
            }
        }
        let h = hyper.hidden;
        let forget = layout.lstm_b.start + h..layout.lstm_b.start + 2 * h;
        model.params[forget].iter_mut().for_each(|b| *b = FORGET_BIAS);
        Ok(model)
    }

    pub fn zeros(hyper: Hyper) -> Result<Self, PredictionError> {
        hyper.validate()?;
        let total = Layout::new(&hyper).total;
        Ok(Self {
            hyper,
            layout_len: total,
            params: vec![0.0; total],
        })
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn tensor_names(&self) -> Vec<&'static str> {
        Layout::new(&self.hyper)
            .tensors(&self.hyper)
            .into_iter()
            .map(|t| t.0)
            .collect()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let layout = Layout::new(&self.hyper);
        let range = layout.tensors(&self.hyper).into_iter().find(|t| t.0 == name)?.2;
        Some(&self.params[range])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let layout = Layout::new(&self.hyper);
        let range = layout.tensors(&self.hyper).into_iter().find(|t| t.0 == name)?.2;
        Some(&mut self.params[range])
    }

    /// Serialize as a versioned JSON checkpoint of named tensors.
    pub fn to_checkpoint(&self) -> String {
        let layout = Layout::new(&self.hyper);
        let doc = CheckpointDoc {
            schema: CHECKPOINT_SCHEMA.to_string(),
            hyper: self.hyper,
            tensors: layout
                .tensors(&self.hyper)
                .into_iter()
                .map(|(name, shape, range)| TensorDoc {
                    name: name.to_string(),
                    shape,
                    data: self.params[range].to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint serialization cannot fail")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, PredictionError> {
        let doc: CheckpointDoc = serde_json::from_str(text).map_err(|e| PredictionError::Checkpoint(e.to_string()))?;
        if doc.schema != CHECKPOINT_SCHEMA {
            return Err(PredictionError::Checkpoint(format!(
                "unsupported schema {:?}, expected {CHECKPOINT_SCHEMA:?}",
                doc.schema
            )));
        }
        let mut model = Self::zeros(doc.hyper)?;
        let expected = Layout::new(&doc.hyper).tensors(&doc.hyper);
        if expected.len() != doc.tensors.len() {
            return Err(PredictionError::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                doc.tensors.len()
            )));
        }
        for ((name, shape, range), t) in expected.into_iter().zip(&doc.tensors) {
            if t.name != name || t.shape != shape || t.data.len() != range.len() {
                return Err(PredictionError::Checkpoint(format!(
                    "tensor {:?} {:?} does not match expected {name:?} {shape:?}",
                    t.name, t.shape
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(PredictionError::Checkpoint(format!(
                    "tensor {name:?} has non-finite values"
                )));
            }
            model.params[range].copy_from_slice(&t.data);
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    schema: String,
    hyper: Hyper,
    tensors: Vec<TensorDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorDoc {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl RecurrentState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Parameter slice plus layout; `R` is `f64` for inference or a tape variable.
struct Net<'a, R> {
    p: &'a [R],
    layout: &'a Layout,
    hyper: &'a Hyper,
}

#[derive(Clone)]
struct CellState<R> {
    h: Vec<R>,
    c: Vec<R>,
    o: Vec<R>,
}

fn affine<R: Real>(w: &[R], b: &[R], x: &[R]) -> Vec<R> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            let row = &w[r * cols..(r + 1) * cols];
            row.iter().zip(x).fold(bias, |acc, (&wi, &xi)| acc + wi * xi)
        })
        .collect()
}

fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).fold(R::from_f64(0.0), |acc, (&x, &y)| acc + x * y)
}

/// Refined cell states and, per pedestrian, `(neighbour, weight)` attention pairs.
type Refined<R> = (Vec<Vec<R>>, Vec<Vec<(usize, f64)>>);

impl<R: Real> Net<'_, R> {
    fn cell(&self, disp: [R; 2], h: &[R], c: &[R]) -> CellState<R> {
        let l = self.layout;
        let n = self.hyper.hidden;
        let mut xh = affine(&self.p[l.embed_w.clone()], &self.p[l.embed_b.clone()], &disp);
        xh.extend_from_slice(h);
        let z = affine(&self.p[l.lstm_w.clone()], &self.p[l.lstm_b.clone()], &xh);
        let mut h_new = Vec::with_capacity(n);
        let mut c_new = Vec::with_capacity(n);
        let mut o_gate = Vec::with_capacity(n);
        for k in 0..n {
            let i = z[k].sigmoid();
            let f = z[n + k].sigmoid();
            let g = z[2 * n + k].tanh();
            let o = z[3 * n + k].sigmoid();
            let ck = f * c[k] + i * g;
            c_new.push(ck);
            h_new.push(o * ck.tanh());
            o_gate.push(o);
        }
        CellState {
            h: h_new,
            c: c_new,
            o: o_gate,
        }
    }

    /// One refinement round: new cell states and per-pedestrian attention.
    fn refine(&self, hs: &[&[R]], cs: &[&[R]], pos: &[[R; 2]]) -> Refined<R> {
        let l = self.layout;
        let radius2 = self.hyper.neighbor_radius * self.hyper.neighbor_radius;
        let (kappa, lambda) = (self.p[l.attention.start], self.p[l.attention.start + 1]);
        let mut cells = Vec::with_capacity(cs.len());
        let mut weights = Vec::with_capacity(cs.len());
        for i in 0..cs.len() {
            let mut messages = Vec::new();
            let mut scores = Vec::new();
            let mut ids = Vec::new();
            for j in 0..cs.len() {
                if j == i {
                    continue;
                }
                let dx = pos[j][0] - pos[i][0];
                let dy = pos[j][1] - pos[i][1];
                let d2 = dx * dx + dy * dy;
                if d2.value() > radius2 {
                    continue;
                }
                let mut input = hs[j].to_vec();
                input.push(dx);
                input.push(dy);
                let m: Vec<R> = affine(&self.p[l.msg_w.clone()], &self.p[l.msg_b.clone()], &input)
                    .into_iter()
                    .map(|v| v.tanh())
                    .collect();
                scores.push(kappa * dot(hs[i], &m) + lambda * d2);
                messages.push(m);
                ids.push(j);
            }
            if messages.is_empty() {
                cells.push(cs[i].to_vec());
                weights.push(Vec::new());
                continue;
            }
            let shift = R::from_f64(scores.iter().map(|s| s.value()).fold(f64::NEG_INFINITY, f64::max));
            let exps: Vec<R> = scores.iter().map(|&s| (s - shift).exp()).collect();
            let norm = exps.iter().fold(R::from_f64(0.0), |acc, &e| acc + e);
            let mut refined = cs[i].to_vec();
            let mut w_i = Vec::with_capacity(ids.len());
            for ((e, m), &j) in exps.iter().zip(&messages).zip(&ids) {
                let a = *e / norm;
                for (c, &mk) in refined.iter_mut().zip(m) {
                    *c = *c + a * mk;
                }
                w_i.push((j, a.value()));
            }
            cells.push(refined);
            weights.push(w_i);
        }
        (cells, weights)
    }

    /// Advance every pedestrian one frame, then refine `layers` times.
    fn step(&self, states: &[CellState<R>], inputs: &[[R; 2]], pos: &[[R; 2]], layers: usize) -> Vec<CellState<R>> {
        let mut next: Vec<CellState<R>> = states
            .iter()
            .zip(inputs)
            .map(|(s, &x)| self.cell(x, &s.h, &s.c))
            .collect();
        for _ in 0..layers {
            let hs: Vec<&[R]> = next.iter().map(|s| s.h.as_slice()).collect();
            let cs: Vec<&[R]> = next.iter().map(|s| s.c.as_slice()).collect();
            let (cells, _) = self.refine(&hs, &cs, pos);
            for (s, c) in next.iter_mut().zip(cells) {
                s.h = s.o.iter().zip(&c).map(|(&o, &ck)| o * ck.tanh()).collect();
                s.c = c;
            }
        }
        next
    }

    fn decode(&self, h: &[R]) -> [R; 2] {
        let l = self.layout;
        let d = affine(&self.p[l.dec_w.clone()], &self.p[l.dec_b.clone()], h);
        [d[0], d[1]]
    }

    /// Predicted absolute positions, `pred_len` per pedestrian.
    fn rollout(&self, observed: &[Vec<Point2>], pred_len: usize, layers: usize) -> Vec<Vec<[R; 2]>> {
        let n_peds = observed.len();
        let n_obs = observed.first().map_or(0, Vec::len);
        let lift = |p: Point2| [R::from_f64(p.x), R::from_f64(p.y)];
        let zero = vec![R::from_f64(0.0); self.hyper.hidden];
        let mut states = vec![
            CellState {
                h: zero.clone(),
                c: zero.clone(),
                o: zero,
            };
            n_peds
        ];
        for t in 1..n_obs {
            let inputs: Vec<[R; 2]> = observed.iter().map(|o| lift(o[t] - o[t - 1])).collect();
            let pos: Vec<[R; 2]> = observed.iter().map(|o| lift(o[t])).collect();
            states = self.step(&states, &inputs, &pos, layers);
        }
        let mut pos: Vec<[R; 2]> = observed.iter().map(|o| lift(o[n_obs - 1])).collect();
        // the decoder corrects the last observed displacement, so zero output is constant velocity
        let base: Vec<[R; 2]> = observed.iter().map(|o| lift(o[n_obs - 1] - o[n_obs - 2])).collect();
        let mut out = vec![Vec::with_capacity(pred_len); n_peds];
        for k in 0..pred_len {
            let disp: Vec<[R; 2]> = states
                .iter()
                .zip(&base)
                .map(|(s, b)| {
                    let corr = self.decode(&s.h);
                    [b[0] + corr[0], b[1] + corr[1]]
                })
                .collect();
            for ((p, d), track) in pos.iter_mut().zip(&disp).zip(out.iter_mut()) {
                *p = [p[0] + d[0], p[1] + d[1]];
                track.push(*p);
            }
            if k + 1 < pred_len {
                states = self.step(&states, &disp, &pos, layers);
            }
        }
        out
    }
}

fn check_state(model: &SrLstmModel, state: &RecurrentState) -> Result<(), PredictionError> {
    let n = model.hyper.hidden;
    for len in [state.h.len(), state.c.len()] {
        if len != n {
            return Err(PredictionError::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    Ok(())
}

/// One gated recurrence step on a displacement input.
pub fn lstm_step(
    model: &SrLstmModel,
    input: Point2,
    state: &RecurrentState,
) -> Result<RecurrentState, PredictionError> {
    check_state(model, state)?;
    let layout = Layout::new(&model.hyper);
    let net = Net {
        p: &model.params,
        layout: &layout,
        hyper: &model.hyper,
    };
    let out = net.cell([input.x, input.y], &state.h, &state.c);
    Ok(RecurrentState { h: out.h, c: out.c })
}

fn refine_inputs(
    model: &SrLstmModel,
    states: &[RecurrentState],
    positions: &[Point2],
) -> Result<Refined<f64>, PredictionError> {
    if states.len() != positions.len() {
        return Err(PredictionError::LengthMismatch {
            left: states.len(),
            right: positions.len(),
        });
    }
    for s in states {
        check_state(model, s)?;
    }
    let layout = Layout::new(&model.hyper);
    let net = Net {
        p: &model.params,
        layout: &layout,
        hyper: &model.hyper,
    };
    let hs: Vec<&[f64]> = states.iter().map(|s| s.h.as_slice()).collect();
    let cs: Vec<&[f64]> = states.iter().map(|s| s.c.as_slice()).collect();
    let pos: Vec<[f64; 2]> = positions.iter().map(|p| [p.x, p.y]).collect();
    Ok(net.refine(&hs, &cs, &pos))
}

/// Refined cell state for every pedestrian (one refinement round).
pub fn refine_states(
    model: &SrLstmModel,
    states: &[RecurrentState],
    positions: &[Point2],
) -> Result<Vec<Vec<f64>>, PredictionError> {
    refine_inputs(model, states, positions).map(|(cells, _)| cells)
}

/// Attention weights `(neighbour index, a_ij)` used by [`refine_states`].
pub fn attention_weights(
    model: &SrLstmModel,
    states: &[RecurrentState],
    positions: &[Point2],
) -> Result<Vec<Vec<(usize, f64)>>, PredictionError> {
    refine_inputs(model, states, positions).map(|(_, w)| w)
}

fn aligned_observations(histories: &[PedestrianTrack]) -> Result<Vec<Vec<Point2>>, PredictionError> {
    let Some(first) = histories.first() else {
        return Ok(Vec::new());
    };
    let key = first.frame_indices();
    for h in histories {
        if h.frames.len() < 2 {
            return Err(PredictionError::TooFewFrames {
                ped_id: h.ped_id,
                frames: h.frames.len(),
            });
        }
        if h.frame_indices() != key {
            return Err(PredictionError::MisalignedFrames { ped_id: h.ped_id });
        }
    }
    Ok(histories.iter().map(|h| h.positions().collect()).collect())
}

/// Jointly predict the future of co-observed pedestrians.
pub fn predict_srlstm(
    model: &SrLstmModel,
    histories: &[PedestrianTrack],
    pred_len: usize,
) -> Result<Vec<PredictedTrajectory>, PredictionError> {
    predict_srlstm_with(model, histories, pred_len, true)
}

/// As [`predict_srlstm`], optionally skipping the refinement layer.
pub fn predict_srlstm_with(
    model: &SrLstmModel,
    histories: &[PedestrianTrack],
    pred_len: usize,
    refine: bool,
) -> Result<Vec<PredictedTrajectory>, PredictionError> {
    let observed = aligned_observations(histories)?;
    let layout = Layout::new(&model.hyper);
    let net = Net {
        p: &model.params,
        layout: &layout,
        hyper: &model.hyper,
    };
    let layers = if refine { model.hyper.refinement_layers } else { 0 };
    let predicted = net.rollout(&observed, pred_len, layers);
    Ok(histories
        .iter()
        .zip(predicted)
        .map(|(h, pts)| {
            PredictedTrajectory::from_positions(
                h.ped_id,
                h.frame_interval,
                pts.into_iter().map(|[x, y]| Point2::new(x, y)),
            )
        })
        .collect())
}

/// One observed window and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub history: Vec<Point2>,
    pub truth: Vec<Point2>,
    /// Frame indices of the history; samples with equal keys share a scene.
    pub key: Vec<i64>,
}

impl TrainingSample {
    pub fn from_split(history: &PedestrianTrack, truth: &PedestrianTrack) -> Self {
        Self {
            history: history.positions().collect(),
            truth: truth.positions().collect(),
            key: history.frame_indices(),
        }
    }
}

fn scene_groups(samples: &[&TrainingSample]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<(&[i64], usize), Vec<usize>> = BTreeMap::new();
    for (k, s) in samples.iter().enumerate() {
        groups.entry((s.key.as_slice(), s.truth.len())).or_default().push(k);
    }
    groups.into_values().collect()
}

fn loss_generic<R: Real>(net: &Net<'_, R>, samples: &[&TrainingSample]) -> R {
    let mut total = R::from_f64(0.0);
    let mut count = 0usize;
    for group in scene_groups(samples) {
        let observed: Vec<Vec<Point2>> = group.iter().map(|&k| samples[k].history.clone()).collect();
        let pred_len = samples[group[0]].truth.len();
        let predicted = net.rollout(&observed, pred_len, net.hyper.refinement_layers);
        for (&k, pts) in group.iter().zip(&predicted) {
            for (p, t) in pts.iter().zip(&samples[k].truth) {
                let dx = p[0] - R::from_f64(t.x);
                let dy = p[1] - R::from_f64(t.y);
                total = total + dx * dx + dy * dy;
                count += 1;
            }
        }
    }
    total / R::from_f64(count.max(1) as f64)
}

/// Mean squared position error (m²) over every predicted step of the batch.
pub fn batch_loss(model: &SrLstmModel, samples: &[&TrainingSample]) -> f64 {
    let layout = Layout::new(&model.hyper);
    let net = Net {
        p: &model.params,
        layout: &layout,
        hyper: &model.hyper,
    };
    loss_generic(&net, samples)
}

/// Loss and its exact gradient with respect to every parameter.
pub fn batch_loss_and_gradient(model: &SrLstmModel, samples: &[&TrainingSample]) -> (f64, Vec<f64>) {
    let layout = Layout::new(&model.hyper);
    let tape = Tape::new();
    let vars: Vec<_> = model.params.iter().map(|&w| tape.var(w)).collect();
    let net = Net {
        p: &vars,
        layout: &layout,
        hyper: &model.hyper,
    };
    let loss = loss_generic(&net, samples);
    let adjoint = tape.gradient(loss);
    let grad = vars.iter().map(|v| v.index().map_or(0.0, |k| adjoint[k])).collect();
    (loss.value(), grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub obs_len: usize,
    pub pred_len: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch: 64,
            lr: 0.01,
            obs_len: 8,
            pred_len: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: SrLstmModel,
    /// Mean batch loss of each epoch, measured before that batch's update.
    pub loss_trace: Vec<f64>,
    pub samples_used: usize,
    pub skipped: usize,
}

/// Plain fixed-rate gradient descent on the mean squared position error.
pub fn train_desk_scale(
    model: &SrLstmModel,
    tracks: &[PedestrianTrack],
    config: TrainingConfig,
) -> Result<TrainingOutcome, PredictionError> {
    if tracks.is_empty() {
        return Err(PredictionError::EmptyTrainingSet);
    }
    let mut samples = Vec::new();
    let mut skipped = 0;
    for t in tracks {
        match split_obs_pred(t, config.obs_len, config.pred_len) {
            Ok(s) if s.history.len() >= 2 => samples.push(TrainingSample::from_split(&s.history, &s.truth)),
            Ok(_) => skipped += 1,
            Err(reason) => {
                log::debug!("skipping track: {reason}");
                skipped += 1;
            }
        }
    }
    if samples.is_empty() {
        return Err(PredictionError::EmptyTrainingSet);
    }
    let batch = config.batch.max(1);
    let mut model = model.clone();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut weighted = 0.0;
        for chunk in samples.chunks(batch) {
            let refs: Vec<&TrainingSample> = chunk.iter().collect();
            let (loss, grad) = batch_loss_and_gradient(&model, &refs);
            weighted += loss * chunk.len() as f64;
            if config.lr != 0.0 {
                for (w, g) in model.params.iter_mut().zip(&grad) {
                    *w -= config.lr * g;
                }
            }
        }
        let epoch_loss = weighted / samples.len() as f64;
        log::debug!("epoch {epoch}: loss {epoch_loss:.6}");
        loss_trace.push(epoch_loss);
    }
    debug_assert_eq!(model.params.len(), model.layout_len);
    Ok(TrainingOutcome {
        model,
        loss_trace,
        samples_used: samples.len(),
        skipped,
    })
}
