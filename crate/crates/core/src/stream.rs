//! Segment-level data model: action and interaction features, comment
//! aggregation, and sliding sequence windows.

use serde::{Deserialize, Serialize};

use crate::divergence::SIMPLEX_TOL;
use crate::error::{Error, Result};

/// Presenter-side descriptor: a probability distribution over action classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionFeature(Vec<f64>);

impl ActionFeature {
    /// Validates `raw` against the simplex invariant without renormalizing.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        validate_action_feature(raw, false)
    }

    /// Wraps a vector that is already known to be a valid distribution.
    pub(crate) fn from_trusted(values: Vec<f64>) -> Self {
        debug_assert!(crate::divergence::is_simplex(&values));
        ActionFeature(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Checks that `raw` is a probability vector.
///
/// Entries must be finite and nonnegative and sum to one within `1e-6`. When
/// `renormalize` is set, a vector whose sum lies in `[0.99, 1.01]` is divided
/// by its sum instead of being rejected.
pub fn validate_action_feature(mut raw: Vec<f64>, renormalize: bool) -> Result<ActionFeature> {
    if raw.is_empty() {
        return Err(Error::Validation("action feature is empty".into()));
    }
    for (i, &x) in raw.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Validation(format!(
                "action feature entry {i} is {x}; entries must be finite and nonnegative"
            )));
        }
        if x > 1.0 + SIMPLEX_TOL {
            return Err(Error::Validation(format!(
                "action feature entry {i} is {x}; entries must not exceed 1"
            )));
        }
    }
    let sum: f64 = raw.iter().sum();
    if (sum - 1.0).abs() <= SIMPLEX_TOL {
        for x in raw.iter_mut() {
            *x = x.min(1.0);
        }
        return Ok(ActionFeature(raw));
    }
    if renormalize && (0.99..=1.01).contains(&sum) {
        for x in raw.iter_mut() {
            *x /= sum;
        }
        return Ok(ActionFeature(raw));
    }
    Err(Error::Validation(format!(
        "action feature sums to {sum}, expected 1 within {SIMPLEX_TOL}"
    )))
}

/// Raw comment counts per time moment together with the aggregation half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionCounts {
    pub per_moment: Vec<u32>,
    pub halfwidth: usize,
}

impl InteractionCounts {
    pub fn new(per_moment: Vec<u32>, halfwidth: usize) -> Result<Self> {
        if per_moment.is_empty() {
            return Err(Error::Validation("comment counts are empty".into()));
        }
        Ok(InteractionCounts {
            per_moment,
            halfwidth,
        })
    }

    pub fn len(&self) -> usize {
        self.per_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_moment.is_empty()
    }

    /// Total comments in the window `[t - s, t + s]`, truncated at the ends.
    pub fn aggregate(&self, t: usize) -> Result<f64> {
        let n = self.per_moment.len();
        if t >= n {
            return Err(Error::Range(format!("moment {t} out of range 0..{n}")));
        }
        let lo = t.saturating_sub(self.halfwidth);
        let hi = (t + self.halfwidth).min(n - 1);
        Ok(self.per_moment[lo..=hi].iter().map(|&c| c as f64).sum())
    }

    /// Windowed totals for the `k` moments belonging to segment `i`.
    pub fn segment_tuple(&self, i: usize, k: usize) -> Result<Vec<f64>> {
        (i * k..(i + 1) * k).map(|t| self.aggregate(t)).collect()
    }

    /// Number of whole segments of `k` moments covered by the counts.
    pub fn segments(&self, k: usize) -> usize {
        self.per_moment.len() / k
    }
}

/// Free-function form of [`InteractionCounts::aggregate`].
pub fn aggregate_comments(counts: &InteractionCounts, t: usize) -> Result<f64> {
    counts.aggregate(t)
}

/// Running-maximum scale for comment totals.
///
/// Observed maxima accumulate in a pending slot and only take effect on
/// [`refresh`](Self::refresh), so that features built between two refreshes
/// share one scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CountNormalizer {
    scale: f64,
    pending: f64,
}

impl CountNormalizer {
    pub fn with_scale(scale: f64) -> Self {
        CountNormalizer {
            scale,
            pending: scale,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn observe(&mut self, value: f64) {
        if value > self.pending {
            self.pending = value;
        }
    }

    pub fn refresh(&mut self) {
        self.scale = self.scale.max(self.pending);
    }

    /// Maps a raw total into `[0, 1]`. Values above the current scale clamp to 1.
    pub fn normalize(&self, value: f64) -> f64 {
        if self.scale <= 0.0 {
            0.0
        } else {
            (value / self.scale).min(1.0)
        }
    }
}

/// Audience-side descriptor: `3k` normalized count entries then optional extra channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InteractionFeature(Vec<f64>);

impl InteractionFeature {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, x)) = values.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::Validation(format!(
                "interaction entry {i} is not finite ({x})"
            )));
        }
        Ok(InteractionFeature(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mean of the first `count_channels` entries: the segment's normalized audience level.
    pub fn level(&self, count_channels: usize) -> f64 {
        let n = count_channels.min(self.0.len());
        if n == 0 {
            return 0.0;
        }
        self.0[..n].iter().sum::<f64>() / n as f64
    }
}

/// Builds the interaction feature of segment `i`.
///
/// Concatenates the `k`-tuples of windowed comment totals of segments `i-1`,
/// `i` and `i+1`, scales them with `normalizer`, and appends `extras`. At the
/// ends of the stream the missing neighbour is replaced by the existing one.
pub fn build_interaction_feature(
    counts: &InteractionCounts,
    i: usize,
    k: usize,
    normalizer: &CountNormalizer,
    extras: &[f64],
) -> Result<InteractionFeature> {
    if counts.is_empty() {
        return Err(Error::Validation("comment counts are empty".into()));
    }
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    let m = counts.segments(k);
    if i >= m {
        return Err(Error::Range(format!("segment {i} out of range 0..{m}")));
    }
    let prev = if i > 0 { i - 1 } else { (i + 1).min(m - 1) };
    let next = if i + 1 < m { i + 1 } else { i.saturating_sub(1) };
    let mut values = Vec::with_capacity(3 * k + extras.len());
    for seg in [prev, i, next] {
        for d in counts.segment_tuple(seg, k)? {
            values.push(normalizer.normalize(d));
        }
    }
    values.extend_from_slice(extras);
    InteractionFeature::new(values)
}

/// Ground-truth label of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(Label::Normal),
            1 => Ok(Label::Anomaly),
            other => Err(Error::Validation(format!("label must be 0 or 1, got {other}"))),
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Anomaly => 1,
        }
    }

    pub fn is_anomaly(self) -> bool {
        self == Label::Anomaly
    }
}

/// One scoring unit of the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub id: u64,
    pub action: ActionFeature,
    pub interaction: InteractionFeature,
    pub label: Option<Label>,
}

/// `q` consecutive segments plus the segment that follows them.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceWindow {
    pub actions: Vec<ActionFeature>,
    pub interactions: Vec<InteractionFeature>,
    pub target: SegmentRecord,
}

impl SequenceWindow {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Slides a length-`q` window with stride one over `segments`.
///
/// Produces `M - q` windows for `M` segments; window `j` covers segments
/// `j..j+q` and targets segment `j+q`.
pub fn build_sequences(segments: &[SegmentRecord], q: usize) -> Result<Vec<SequenceWindow>> {
    if q == 0 {
        return Err(Error::Validation("sequence length q must be at least 1".into()));
    }
    if segments.len() < q + 1 {
        return Err(Error::Validation(format!(
            "need at least {} segments for q = {q}, got {}",
            q + 1,
            segments.len()
        )));
    }
    if let Some(w) = segments.windows(2).find(|w| w[1].id <= w[0].id) {
        return Err(Error::Validation(format!(
            "segment ids must be strictly increasing ({} then {})",
            w[0].id, w[1].id
        )));
    }
    Ok(segments
        .windows(q + 1)
        .map(|w| SequenceWindow {
            actions: w[..q].iter().map(|s| s.action.clone()).collect(),
            interactions: w[..q].iter().map(|s| s.interaction.clone()).collect(),
            target: w[q].clone(),
        })
        .collect())
}

/// Shape and generation parameters of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    /// Action feature dimension.
    pub d1: usize,
    /// Comment moments per segment.
    pub k: usize,
    /// Auxiliary interaction channels appended after the `3k` count entries.
    pub extra_channels: usize,
    /// Sequence length fed to the model.
    pub q: usize,
    /// Half-width of the comment aggregation window, in moments.
    pub s: usize,
    pub seed: u64,
    pub anomaly_rate: f64,
    /// Number of segments the generator emits.
    pub segments: usize,
    /// Styles in each generated dictionary.
    pub styles: usize,
    /// Per-segment probability of a normal style change.
    pub switch_prob: f64,
    /// Segments between refreshes of the count normalizer.
    pub slot_len: usize,
    /// Switch to a second style dictionary from this segment on.
    pub shift_at: Option<usize>,
    /// Comment-rate multiplier of anomalous segments.
    pub burst_gain: f64,
    /// Comment-rate multiplier of the segment before a normal style change.
    pub precursor_gain: f64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            d1: 40,
            k: 3,
            extra_channels: 2,
            q: 9,
            s: 1,
            seed: 0,
            anomaly_rate: 0.05,
            segments: 2000,
            styles: 4,
            switch_prob: 0.12,
            slot_len: 300,
            shift_at: None,
            burst_gain: 3.5,
            precursor_gain: 3.0,
        }
    }
}

impl StreamConfig {
    pub fn d2(&self) -> usize {
        3 * self.k + self.extra_channels
    }

    pub fn count_channels(&self) -> usize {
        3 * self.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 1 {
            return Err(Error::Validation("q must be at least 1".into()));
        }
        if self.k < 1 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        if self.d1 < 2 {
            return Err(Error::Validation("d1 must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.anomaly_rate) {
            return Err(Error::Validation(format!(
                "anomaly_rate {} outside [0, 1]",
                self.anomaly_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.switch_prob) {
            return Err(Error::Validation(format!(
                "switch_prob {} outside [0, 1]",
                self.switch_prob
            )));
        }
        if self.styles < 1 {
            return Err(Error::Validation("styles must be at least 1".into()));
        }
        for (name, g) in [("burst_gain", self.burst_gain), ("precursor_gain", self.precursor_gain)] {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Validation(format!("{name} {g} must be positive")));
            }
        }
        if self.slot_len < 1 {
            return Err(Error::Validation("slot_len must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(v: &[u32], s: usize) -> InteractionCounts {
        InteractionCounts::new(v.to_vec(), s).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(counts(&[1, 2, 3, 4, 5], 1).aggregate(2).unwrap(), 9.0);
        assert_eq!(counts(&[7], 3).aggregate(0).unwrap(), 7.0);
        assert_eq!(counts(&[0, 0, 0], 1).aggregate(1).unwrap(), 0.0);
        assert!(matches!(
            counts(&[1, 2], 1).aggregate(2),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn aggregate_is_additive_over_disjoint_windows() {
        let a = counts(&[3, 1, 0, 0, 0, 0], 1);
        let b = counts(&[0, 0, 0, 0, 4, 2], 1);
        let both = counts(&[3, 1, 0, 0, 4, 2], 1);
        for t in 0..6 {
            let sum = a.aggregate(t).unwrap() + b.aggregate(t).unwrap();
            assert_eq!(both.aggregate(t).unwrap(), sum);
        }
    }

    #[test]
    fn interaction_feature_normalizes_by_max() {
        let c = counts(&[1, 2, 3, 4, 5, 6], 0);
        let norm = CountNormalizer::with_scale(6.0);
        let a = build_interaction_feature(&c, 1, 2, &norm, &[]).unwrap();
        let want = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0, 4.0 / 6.0, 5.0 / 6.0, 1.0];
        for (x, w) in a.as_slice().iter().zip(want) {
            assert!((x - w).abs() < 1e-15);
        }
    }

    #[test]
    fn interaction_feature_with_extras() {
        let c = counts(&[2, 4, 8], 0);
        let norm = CountNormalizer::with_scale(8.0);
        let a = build_interaction_feature(&c, 1, 1, &norm, &[0.5]).unwrap();
        assert_eq!(a.as_slice(), &[0.25, 0.5, 1.0, 0.5]);
    }

    #[test]
    fn interaction_feature_all_zero() {
        let c = counts(&[0, 0, 0, 0], 1);
        let a = build_interaction_feature(&c, 1, 2, &CountNormalizer::default(), &[]).unwrap();
        assert!(a.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn interaction_feature_boundaries_repeat_neighbour() {
        let c = counts(&[1, 2, 3], 0);
        let norm = CountNormalizer::with_scale(3.0);
        let first = build_interaction_feature(&c, 0, 1, &norm, &[]).unwrap();
        assert_eq!(first.as_slice(), &[2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
        let last = build_interaction_feature(&c, 2, 1, &norm, &[]).unwrap();
        assert_eq!(last.as_slice(), &[2.0 / 3.0, 1.0, 2.0 / 3.0]);
    }

    #[test]
    fn interaction_normalization_is_scale_free() {
        let raw = [3u32, 5, 1, 7, 2, 9];
        let scaled: Vec<u32> = raw.iter().map(|c| c * 4).collect();
        let a = counts(&raw, 1);
        let b = counts(&scaled, 1);
        let max_of = |c: &InteractionCounts| {
            (0..c.len()).map(|t| c.aggregate(t).unwrap()).fold(0.0, f64::max)
        };
        let fa = build_interaction_feature(&a, 1, 2, &CountNormalizer::with_scale(max_of(&a)), &[])
            .unwrap();
        let fb = build_interaction_feature(&b, 1, 2, &CountNormalizer::with_scale(max_of(&b)), &[])
            .unwrap();
        for (x, y) in fa.as_slice().iter().zip(fb.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn normalizer_only_moves_on_refresh() {
        let mut n = CountNormalizer::with_scale(10.0);
        n.observe(20.0);
        assert_eq!(n.normalize(15.0), 1.0);
        n.refresh();
        assert_eq!(n.normalize(15.0), 0.75);
    }

    #[test]
    fn validation_examples() {
        assert!(validate_action_feature(vec![0.5, 0.5], false).is_ok());
        assert!(validate_action_feature(vec![0.7, 0.4], false).is_err());
        assert!(validate_action_feature(vec![0.7, 0.2999999], false).is_ok());
        let err = validate_action_feature(vec![0.5, -0.1, 0.6], false).unwrap_err();
        assert!(err.to_string().contains("entry 1"));
        let r = validate_action_feature(vec![0.5, 0.505], true).unwrap();
        assert!((r.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(validate_action_feature(vec![0.5, 0.6], true).is_err());
    }

    fn seg(id: u64) -> SegmentRecord {
        SegmentRecord {
            id,
            action: ActionFeature::new(vec![1.0, 0.0]).unwrap(),
            interaction: InteractionFeature::new(vec![id as f64]).unwrap(),
            label: None,
        }
    }

    #[test]
    fn sequence_counts() {
        let s: Vec<_> = (0..10).map(seg).collect();
        let w = build_sequences(&s, 9).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].target.id, 9);
        let s: Vec<_> = (0..12).map(seg).collect();
        assert_eq!(build_sequences(&s, 9).unwrap().len(), 3);
        let s: Vec<_> = (0..9).map(seg).collect();
        assert!(build_sequences(&s, 9).is_err());
    }

    #[test]
    fn windows_tile_with_stride_one() {
        let s: Vec<_> = (0..20).map(seg).collect();
        for q in 1..6 {
            let w = build_sequences(&s, q).unwrap();
            assert_eq!(w.len(), 20 - q);
            for (j, win) in w.iter().enumerate() {
                assert_eq!(win.len(), q);
                assert_eq!(win.target.id, (j + q) as u64);
                assert_eq!(win.interactions[0].as_slice()[0], j as f64);
            }
        }
    }

    #[test]
    fn non_monotone_ids_rejected() {
        let s = vec![seg(0), seg(2), seg(1)];
        assert!(build_sequences(&s, 1).is_err());
    }
}
