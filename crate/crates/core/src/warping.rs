//! Copy and interpolation warping operators, randomized warped variants, and
//! direction-ordered training pairs.
//!
//! Each operator acts on a 4-point focus window `[p1, p2, p3, p4]` starting at
//! index `w` and leaves every value outside the window untouched:
//!
//! | op  | window becomes               |
//! |-----|------------------------------|
//! | LCW | `[p1, p3, p4, p4]`           |
//! | RCW | `[p1, p1, p2, p4]`           |
//! | LIW | `[p1, p3, (p3+p4)/2, p4]`    |
//! | RIW | `[p1, (p1+p2)/2, p2, p4]`    |

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, WartemError};
use crate::rng::{mix, rng_from_seed};
use crate::series::{TimeSeries, MIN_SERIES_LENGTH};

pub const WINDOW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WarpDirection {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WarpFamily {
    Copy,
    Interpolation,
    /// Copy or interpolation, chosen with probability 1/2 per window.
    Mixed,
}

impl std::str::FromStr for WarpDirection {
    type Err = WartemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Self::Left),
            "right" | "r" => Ok(Self::Right),
            _ => Err(WartemError::Argument(format!("unknown warp direction {s:?}"))),
        }
    }
}

impl std::str::FromStr for WarpFamily {
    type Err = WartemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "copy" | "cw" => Ok(Self::Copy),
            "interpolation" | "iw" => Ok(Self::Interpolation),
            "mixed" | "both" => Ok(Self::Mixed),
            _ => Err(WartemError::Argument(format!("unknown warp family {s:?}"))),
        }
    }
}

impl std::fmt::Display for WarpFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Copy => "copy",
            Self::Interpolation => "interpolation",
            Self::Mixed => "mixed",
        })
    }
}

/// A single warping operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WarpOp {
    LeftCopy,
    RightCopy,
    LeftInterpolation,
    RightInterpolation,
}

impl WarpOp {
    /// The operator for a direction and a concrete (non-mixed) family.
    fn select(direction: WarpDirection, interpolate: bool) -> Self {
        match (direction, interpolate) {
            (WarpDirection::Left, false) => Self::LeftCopy,
            (WarpDirection::Right, false) => Self::RightCopy,
            (WarpDirection::Left, true) => Self::LeftInterpolation,
            (WarpDirection::Right, true) => Self::RightInterpolation,
        }
    }

    fn apply_window(self, p: &mut [f64]) {
        let [p1, p2, p3, p4] = [p[0], p[1], p[2], p[3]];
        let window = match self {
            Self::LeftCopy => [p1, p3, p4, p4],
            Self::RightCopy => [p1, p1, p2, p4],
            Self::LeftInterpolation => [p1, p3, (p3 + p4) / 2.0, p4],
            Self::RightInterpolation => [p1, (p1 + p2) / 2.0, p2, p4],
        };
        p.copy_from_slice(&window);
    }
}

/// Applies `op` to the window starting at `start`, returning a new series.
pub fn apply_warp(values: &[f64], op: WarpOp, start: usize) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    warp_in_place(&mut out, op, start)?;
    Ok(out)
}

fn warp_in_place(values: &mut [f64], op: WarpOp, start: usize) -> Result<()> {
    if values.len() < MIN_SERIES_LENGTH {
        return Err(WartemError::SeriesTooShort(values.len()));
    }
    if start + WINDOW > values.len() {
        return Err(WartemError::Index {
            start,
            length: values.len(),
        });
    }
    op.apply_window(&mut values[start..start + WINDOW]);
    Ok(())
}

pub fn lcw(t: &TimeSeries, start: usize) -> Result<TimeSeries> {
    apply_warp(t.values(), WarpOp::LeftCopy, start).map(TimeSeries::from_valid)
}

pub fn rcw(t: &TimeSeries, start: usize) -> Result<TimeSeries> {
    apply_warp(t.values(), WarpOp::RightCopy, start).map(TimeSeries::from_valid)
}

pub fn liw(t: &TimeSeries, start: usize) -> Result<TimeSeries> {
    apply_warp(t.values(), WarpOp::LeftInterpolation, start).map(TimeSeries::from_valid)
}

pub fn riw(t: &TimeSeries, start: usize) -> Result<TimeSeries> {
    apply_warp(t.values(), WarpOp::RightInterpolation, start).map(TimeSeries::from_valid)
}

/// One step of a warp sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WarpStep {
    pub op: WarpOp,
    pub start: usize,
}

/// Draws `count` warp steps for a series of length `m`.
pub fn sample_steps<R: Rng + ?Sized>(
    m: usize,
    count: usize,
    direction: WarpDirection,
    family: WarpFamily,
    rng: &mut R,
) -> Result<Vec<WarpStep>> {
    if m < MIN_SERIES_LENGTH {
        return Err(WartemError::SeriesTooShort(m));
    }
    Ok((0..count)
        .map(|_| {
            let interpolate = match family {
                WarpFamily::Copy => false,
                WarpFamily::Interpolation => true,
                WarpFamily::Mixed => rng.gen_bool(0.5),
            };
            let start = rng.gen_range(0..=m - WINDOW);
            WarpStep {
                op: WarpOp::select(direction, interpolate),
                start,
            }
        })
        .collect())
}

/// Draws the number of warps `r` uniformly from `0..=floor(m/2)`.
pub fn sample_warp_count<R: Rng + ?Sized>(m: usize, rng: &mut R) -> usize {
    rng.gen_range(0..=m / 2)
}

/// Applies steps sequentially, each to the output of the previous one.
pub fn apply_steps(t: &TimeSeries, steps: &[WarpStep]) -> Result<TimeSeries> {
    let mut values = t.values().to_vec();
    for step in steps {
        warp_in_place(&mut values, step.op, step.start)?;
    }
    Ok(TimeSeries::from_valid(values))
}

/// Applies exactly `count` randomly placed warps.
pub fn warp_n_times<R: Rng + ?Sized>(
    t: &TimeSeries,
    count: usize,
    direction: WarpDirection,
    family: WarpFamily,
    rng: &mut R,
) -> Result<TimeSeries> {
    let steps = sample_steps(t.len(), count, direction, family, rng)?;
    apply_steps(t, &steps)
}

/// A warped variant: `r ~ U{0..=floor(m/2)}` warps in one direction, each on
/// a uniformly drawn window of the running series.
pub fn generate_warped_variant<R: Rng + ?Sized>(
    t: &TimeSeries,
    direction: WarpDirection,
    family: WarpFamily,
    rng: &mut R,
) -> Result<TimeSeries> {
    if t.len() < MIN_SERIES_LENGTH {
        return Err(WartemError::SeriesTooShort(t.len()));
    }
    let r = sample_warp_count(t.len(), rng);
    warp_n_times(t, r, direction, family, rng)
}

/// Ordered input pair for the twin auto-encoder. The left input is the
/// original series or a left-warped variant, never right-warped; mirrored
/// for the right input.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub left_input: TimeSeries,
    pub right_input: TimeSeries,
    pub source_index: usize,
    /// The side holding the warped variant; the other side is the original.
    pub warped_side: WarpDirection,
}

/// Both pairs for one series: `[L(T), T]` and `[T, R(T)]`.
pub fn pairs_for_series<R: Rng + ?Sized>(
    t: &TimeSeries,
    source_index: usize,
    family: WarpFamily,
    rng: &mut R,
) -> Result<[TrainingPair; 2]> {
    let left = generate_warped_variant(t, WarpDirection::Left, family, rng)?;
    let right = generate_warped_variant(t, WarpDirection::Right, family, rng)?;
    Ok([
        TrainingPair {
            left_input: left,
            right_input: t.clone(),
            source_index,
            warped_side: WarpDirection::Left,
        },
        TrainingPair {
            left_input: t.clone(),
            right_input: right,
            source_index,
            warped_side: WarpDirection::Right,
        },
    ])
}

/// Builds `2 * series.len()` shuffled pairs. Series `i` draws its warps from
/// the sub-seed `mix(seed, i)`, so generation parallelizes without changing
/// the result.
pub fn make_training_pairs(
    series: &[TimeSeries],
    family: WarpFamily,
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    let per_series = series
        .par_iter()
        .enumerate()
        .map(|(i, t)| pairs_for_series(t, i, family, &mut rng_from_seed(mix(seed, i as u64))))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs: Vec<TrainingPair> = per_series.into_iter().flatten().collect();
    pairs.shuffle(&mut rng_from_seed(mix(seed, u64::MAX)));
    Ok(pairs)
}

/// Checks the directionality invariant of a pair against its source series.
pub fn pair_respects_direction(pair: &TrainingPair, source: &TimeSeries) -> bool {
    let m = source.len();
    if pair.left_input.len() != m || pair.right_input.len() != m {
        return false;
    }
    match pair.warped_side {
        WarpDirection::Left => pair.right_input == *source,
        WarpDirection::Right => pair.left_input == *source,
    }
}
