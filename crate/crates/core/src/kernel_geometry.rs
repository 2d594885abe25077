//! Equilibrium levels and the geometry of floating discrete filters.
//!
//! Filters are sampled from the spiral `f(θ) = R(θ)·e^{jθ}` with
//! `R(θ) = θ^{α·n} / β`, where `n ∈ [-1, 1]` is the scaled equilibrium. For
//! positive `n` the radius grows along the spiral and the cells scatter; for
//! negative `n` it shrinks and the cells gather around the anchor. The lowest
//! level bypasses the spiral and yields the contiguous 3×3 kernel.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of discrete equilibrium configurations.
pub const LEVEL_COUNT: usize = 9;

/// One of the nine discrete equilibrium values `e = 1 - index/8`.
///
/// Index 0 is `e = 1` (most scattered filter), index 8 is `e = 0` (the normal
/// contiguous filter).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct EquilibriumLevel(u8);

impl EquilibriumLevel {
    pub const MOST_SCATTERED: EquilibriumLevel = EquilibriumLevel(0);
    pub const NORMAL: EquilibriumLevel = EquilibriumLevel((LEVEL_COUNT - 1) as u8);

    pub fn new(index: usize) -> Result<Self> {
        if index < LEVEL_COUNT {
            Ok(EquilibriumLevel(index as u8))
        } else {
            Err(Error::param(
                "level",
                format!("index {index} outside 0..={}", LEVEL_COUNT - 1),
            ))
        }
    }

    /// All nine levels in cascade order (most scattered first).
    pub fn all() -> impl DoubleEndedIterator<Item = EquilibriumLevel> + ExactSizeIterator {
        (0..LEVEL_COUNT as u8).map(EquilibriumLevel)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Equilibrium value `e ∈ [0, 1]`.
    pub fn value(self) -> f64 {
        1.0 - self.0 as f64 / (LEVEL_COUNT - 1) as f64
    }

    /// Scaled equilibrium `n = 2e - 1 ∈ [-1, 1]`.
    pub fn scaled(self) -> f64 {
        scaled_n(self)
    }

    pub fn is_normal(self) -> bool {
        self == Self::NORMAL
    }

    /// The next, more concentrated level, if any.
    pub fn next(self) -> Option<EquilibriumLevel> {
        (self.index() + 1 < LEVEL_COUNT).then(|| EquilibriumLevel(self.0 + 1))
    }
}

impl TryFrom<usize> for EquilibriumLevel {
    type Error = Error;

    fn try_from(index: usize) -> Result<Self> {
        EquilibriumLevel::new(index)
    }
}

impl From<EquilibriumLevel> for usize {
    fn from(level: EquilibriumLevel) -> usize {
        level.index()
    }
}

impl fmt::Display for EquilibriumLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn scaled_n(level: EquilibriumLevel) -> f64 {
    2.0 * level.value() - 1.0
}

/// Spiral radius `θ^{α·n} / β`.
pub fn spiral_radius(theta: f64, n: f64, alpha: f64, beta: f64) -> Result<f64> {
    if theta.is_nan() || theta <= 0.0 {
        return Err(Error::Domain(format!("spiral phase must be positive, got {theta}")));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::Domain(format!("spiral normalizer must be positive, got {beta}")));
    }
    Ok(theta.powf(alpha * n) / beta)
}

/// Parameters of the spiral filter family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpiralParams {
    /// Exponent scale, in (0, 1).
    pub alpha: f64,
    /// Number of spiral turns: θ ranges over (0, 2kπ].
    pub turns: u32,
    /// Non-null cells per filter.
    pub cell_count: usize,
    /// Maximum radius for each level, indexed by level.
    pub r_max: [f64; LEVEL_COUNT],
    /// Discretization density of θ.
    pub theta_samples: usize,
}

impl Default for SpiralParams {
    fn default() -> Self {
        let mut r_max = [0.0; LEVEL_COUNT];
        for level in EquilibriumLevel::all() {
            r_max[level.index()] = 1.0 + 3.0 * level.value();
        }
        SpiralParams {
            alpha: 0.25,
            turns: 1,
            cell_count: 9,
            r_max,
            theta_samples: 32,
        }
    }
}

impl SpiralParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("{} not in (0, 1)", self.alpha)));
        }
        if self.turns == 0 {
            return Err(Error::param("turns", "must be positive"));
        }
        if self.cell_count == 0 {
            return Err(Error::param("cell_count", "must be positive"));
        }
        if let Some((i, r)) = self.r_max.iter().enumerate().find(|(_, r)| r.is_nan() || **r <= 0.0) {
            return Err(Error::param("r_max", format!("level {i} has non-positive radius {r}")));
        }
        if self.theta_samples < self.cell_count {
            return Err(Error::param(
                "theta_samples",
                format!("{} is below cell_count {}", self.theta_samples, self.cell_count),
            ));
        }
        Ok(())
    }

    /// Uniform samples `θ_j = (j+1)·2kπ/S`, `j = 0..S`.
    pub fn thetas(&self) -> Vec<f64> {
        let span = 2.0 * PI * self.turns as f64;
        let samples = self.theta_samples as f64;
        (1..=self.theta_samples).map(|j| j as f64 * span / samples).collect()
    }

    /// The β that scales the largest sampled radius of `level` to its `r_max`.
    pub fn auto_beta(&self, level: EquilibriumLevel) -> f64 {
        let exponent = self.alpha * level.scaled();
        let peak = self
            .thetas()
            .into_iter()
            .map(|t| t.powf(exponent))
            .fold(f64::MIN, f64::max);
        peak / self.r_max[level.index()]
    }
}

/// A grid offset relative to the anchor pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Offset {
    pub row: i32,
    pub col: i32,
}

impl Offset {
    pub const CENTER: Offset = Offset { row: 0, col: 0 };

    pub const fn new(row: i32, col: i32) -> Self {
        Offset { row, col }
    }

    pub fn chebyshev(self) -> i32 {
        self.row.abs().max(self.col.abs())
    }

    pub fn norm(self) -> f64 {
        (self.row as f64).hypot(self.col as f64)
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Smallest odd side `s` such that every offset fits in the centered `s×s` box.
pub fn extent_of(offsets: &[Offset]) -> usize {
    let reach = offsets.iter().map(|o| o.chebyshev()).max().unwrap_or(0);
    2 * reach as usize + 1
}

/// A floating discrete filter: unique offsets (always including the anchor)
/// for one equilibrium level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterSpec {
    level: EquilibriumLevel,
    offsets: Vec<Offset>,
    extent: usize,
}

impl FilterSpec {
    /// Builds a spec with the minimal extent.
    pub fn new(level: EquilibriumLevel, offsets: Vec<Offset>) -> Result<Self> {
        let extent = extent_of(&offsets);
        Self::with_extent(level, offsets, extent)
    }

    pub fn with_extent(level: EquilibriumLevel, offsets: Vec<Offset>, extent: usize) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidFilter(format!("level {level} has no cells")));
        }
        let mut seen = HashSet::with_capacity(offsets.len());
        if let Some(dup) = offsets.iter().find(|o| !seen.insert(**o)) {
            return Err(Error::InvalidFilter(format!("level {level}: duplicate offset {dup}")));
        }
        if !seen.contains(&Offset::CENTER) {
            return Err(Error::InvalidFilter(format!(
                "level {level}: missing center cell (0, 0)"
            )));
        }
        if extent.is_multiple_of(2) {
            return Err(Error::InvalidFilter(format!(
                "level {level}: extent {extent} is not odd"
            )));
        }
        let needed = extent_of(&offsets);
        if extent < needed {
            return Err(Error::InvalidFilter(format!(
                "level {level}: extent {extent} cannot hold offsets needing {needed}"
            )));
        }
        Ok(FilterSpec { level, offsets, extent })
    }

    /// The contiguous 3×3 kernel, row-major.
    pub fn normal() -> Self {
        let offsets = (-1..=1)
            .flat_map(|r| (-1..=1).map(move |c| Offset::new(r, c)))
            .collect();
        FilterSpec {
            level: EquilibriumLevel::NORMAL,
            offsets,
            extent: 3,
        }
    }

    pub fn level(&self) -> EquilibriumLevel {
        self.level
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn cell_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    /// Mean Euclidean norm of the offsets.
    pub fn mean_norm(&self) -> f64 {
        self.offsets.iter().map(|o| o.norm()).sum::<f64>() / self.offsets.len() as f64
    }

    /// Serializes this spec as one block of the filter-spec text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "level {} cells {} extent {}",
            self.level,
            self.offsets.len(),
            self.extent
        )
        .unwrap();
        for o in &self.offsets {
            writeln!(out, "{} {}", o.row, o.col).unwrap();
        }
        out
    }
}

/// Samples the spiral for `level` and snaps it onto the grid.
///
/// The anchor cell comes first, followed by distinct cells in θ order until
/// `cell_count` cells are collected.
pub fn generate_filter(level: EquilibriumLevel, params: &SpiralParams) -> Result<FilterSpec> {
    if level.is_normal() {
        return Ok(FilterSpec::normal());
    }
    params.validate()?;
    let n = level.scaled();
    let beta = params.auto_beta(level);

    let mut offsets = vec![Offset::CENTER];
    let mut seen: HashSet<Offset> = offsets.iter().copied().collect();
    for theta in params.thetas() {
        if offsets.len() == params.cell_count {
            break;
        }
        let r = spiral_radius(theta, n, params.alpha, beta)?;
        let cell = Offset::new((r * theta.sin()).round() as i32, (r * theta.cos()).round() as i32);
        if seen.insert(cell) {
            offsets.push(cell);
        }
    }
    if offsets.len() < params.cell_count {
        return Err(Error::Generation {
            level: level.index(),
            reason: format!(
                "only {} distinct cells from {} θ samples, need {}; raise theta_samples or r_max",
                offsets.len(),
                params.theta_samples,
                params.cell_count
            ),
        });
    }
    FilterSpec::new(level, offsets)
}

/// A continuous point on the spiral, for plotting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralPoint {
    pub theta: f64,
    pub radius: f64,
    pub x: f64,
    pub y: f64,
}

/// Continuous spiral points for scaled equilibrium `n` at the θ samples of
/// `params`, with an explicit normalizer `beta`.
pub fn spiral_points(n: f64, alpha: f64, beta: f64, params: &SpiralParams) -> Result<Vec<SpiralPoint>> {
    params
        .thetas()
        .into_iter()
        .map(|theta| {
            let radius = spiral_radius(theta, n, alpha, beta)?;
            Ok(SpiralPoint {
                theta,
                radius,
                x: radius * theta.cos(),
                y: radius * theta.sin(),
            })
        })
        .collect()
}

/// CSV rendering of spiral points (`theta,radius,x,y`).
pub fn spiral_points_csv(points: &[SpiralPoint]) -> String {
    let mut out = String::from("theta,radius,x,y\n");
    for p in points {
        writeln!(out, "{:.12},{:.12},{:.12},{:.12}", p.theta, p.radius, p.x, p.y).unwrap();
    }
    out
}

/// Renders several specs into one filter-spec document.
pub fn format_filter_specs<'a>(specs: impl IntoIterator<Item = &'a FilterSpec>) -> String {
    specs
        .into_iter()
        .map(FilterSpec::to_text)
        .collect::<Vec<_>>()
        .join("\n")
}

struct PendingBlock {
    header_line: usize,
    level: EquilibriumLevel,
    cells: usize,
    extent: usize,
    offsets: Vec<Offset>,
    seen: HashSet<Offset>,
}

impl PendingBlock {
    fn finish(self, out: &mut BTreeMap<EquilibriumLevel, FilterSpec>) -> Result<()> {
        let line = self.header_line;
        if self.offsets.len() != self.cells {
            return Err(Error::FilterSpecParse {
                line,
                reason: format!("header declares {} cells, found {}", self.cells, self.offsets.len()),
            });
        }
        if !self.seen.contains(&Offset::CENTER) {
            return Err(Error::FilterSpecParse {
                line,
                reason: "missing center cell (0, 0)".into(),
            });
        }
        let spec =
            FilterSpec::with_extent(self.level, self.offsets, self.extent).map_err(|e| Error::FilterSpecParse {
                line,
                reason: e.to_string(),
            })?;
        if out.insert(self.level, spec).is_some() {
            return Err(Error::FilterSpecParse {
                line,
                reason: format!("level {} declared twice", self.level),
            });
        }
        Ok(())
    }
}

fn parse_header(tokens: &[&str], line: usize) -> Result<(EquilibriumLevel, usize, usize)> {
    let err = |reason: String| Error::FilterSpecParse { line, reason };
    match tokens {
        ["level", level, "cells", cells, "extent", extent] => {
            let level: usize = level.parse().map_err(|_| err(format!("bad level `{level}`")))?;
            let level = EquilibriumLevel::new(level).map_err(|e| err(e.to_string()))?;
            let cells = cells.parse().map_err(|_| err(format!("bad cell count `{cells}`")))?;
            let extent = extent.parse().map_err(|_| err(format!("bad extent `{extent}`")))?;
            Ok((level, cells, extent))
        }
        _ => Err(err("expected `level <index> cells <count> extent <s>`".into())),
    }
}

/// Parses a filter-spec document into one spec per declared level.
pub fn parse_filter_specs(text: &str) -> Result<BTreeMap<EquilibriumLevel, FilterSpec>> {
    let mut out = BTreeMap::new();
    let mut pending: Option<PendingBlock> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens[0] == "level" {
            if let Some(block) = pending.take() {
                block.finish(&mut out)?;
            }
            let (level, cells, extent) = parse_header(&tokens, line)?;
            pending = Some(PendingBlock {
                header_line: line,
                level,
                cells,
                extent,
                offsets: Vec::with_capacity(cells),
                seen: HashSet::new(),
            });
            continue;
        }
        let block = pending.as_mut().ok_or_else(|| Error::FilterSpecParse {
            line,
            reason: "offset row before any `level` header".into(),
        })?;
        let offset = match tokens.as_slice() {
            [r, c] => match (r.parse(), c.parse()) {
                (Ok(r), Ok(c)) => Offset::new(r, c),
                _ => {
                    return Err(Error::FilterSpecParse {
                        line,
                        reason: format!("malformed offset row `{content}`"),
                    })
                }
            },
            _ => {
                return Err(Error::FilterSpecParse {
                    line,
                    reason: format!("malformed offset row `{content}`"),
                })
            }
        };
        if !block.seen.insert(offset) {
            return Err(Error::FilterSpecParse {
                line,
                reason: format!("duplicate offset {offset}"),
            });
        }
        block.offsets.push(offset);
    }
    if let Some(block) = pending {
        block.finish(&mut out)?;
    }
    if out.is_empty() {
        return Err(Error::FilterSpecParse {
            line: 0,
            reason: "no `level` blocks found".into(),
        });
    }
    Ok(out)
}

pub fn load_filter_spec(path: impl AsRef<Path>) -> Result<BTreeMap<EquilibriumLevel, FilterSpec>> {
    parse_filter_specs(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lvl(i: usize) -> EquilibriumLevel {
        EquilibriumLevel::new(i).unwrap()
    }

    #[test]
    fn scaled_endpoints() {
        assert_eq!(scaled_n(lvl(0)), 1.0);
        assert_eq!(scaled_n(lvl(4)), 0.0);
        assert_eq!(scaled_n(lvl(8)), -1.0);
        assert_eq!(lvl(4).value(), 0.5);
        assert!(EquilibriumLevel::new(9).is_err());
    }

    #[test]
    fn radius_examples() {
        assert_eq!(spiral_radius(3.7, 0.0, 0.5, 1.0).unwrap(), 1.0);
        assert!((spiral_radius(2.0 * PI, 1.0, 1.0, 1.0).unwrap() - 2.0 * PI).abs() < 1e-15);
        assert_eq!(spiral_radius(4.0, -1.0, 0.5, 1.0).unwrap(), 0.5);
        assert!(matches!(spiral_radius(0.0, -1.0, 0.5, 1.0), Err(Error::Domain(_))));
        assert!(spiral_radius(1.0, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn radius_monotonicity_follows_sign_of_n() {
        let thetas: Vec<f64> = (1..200).map(|i| i as f64 * 0.05).collect();
        for n in [-0.9, -0.3, 0.0, 0.4, 1.0] {
            let r: Vec<f64> = thetas.iter().map(|&t| spiral_radius(t, n, 0.7, 1.3).unwrap()).collect();
            for w in r.windows(2) {
                if n > 0.0 {
                    assert!(w[1] > w[0]);
                } else if n < 0.0 {
                    assert!(w[1] < w[0]);
                } else {
                    assert_eq!(w[1], w[0]);
                }
            }
        }
    }

    #[test]
    fn extent_examples() {
        assert_eq!(extent_of(&[Offset::CENTER]), 1);
        assert_eq!(extent_of(&[Offset::CENTER, Offset::new(2, -1)]), 5);
        assert_eq!(extent_of(FilterSpec::normal().offsets()), 3);
    }

    #[test]
    fn normal_level_bypasses_spiral() {
        let spec = generate_filter(EquilibriumLevel::NORMAL, &SpiralParams::default()).unwrap();
        assert_eq!(spec, FilterSpec::normal());
        assert_eq!(spec.extent(), 3);
        let cells: HashSet<_> = spec.offsets().iter().copied().collect();
        for r in -1..=1 {
            for c in -1..=1 {
                assert!(cells.contains(&Offset::new(r, c)));
            }
        }
    }

    #[test]
    fn every_default_level_is_valid() {
        let params = SpiralParams::default();
        for level in EquilibriumLevel::all() {
            let spec = generate_filter(level, &params).unwrap();
            assert_eq!(spec.cell_count(), params.cell_count);
            if !level.is_normal() {
                assert_eq!(spec.offsets()[0], Offset::CENTER);
            }
            let unique: HashSet<_> = spec.offsets().iter().collect();
            assert_eq!(unique.len(), spec.cell_count());
            let half = (spec.extent() as i32 - 1) / 2;
            assert!(spec.offsets().iter().all(|o| o.chebyshev() <= half));
        }
    }

    #[test]
    fn ring_at_zero_scaled_equilibrium() {
        let mut params = SpiralParams::default();
        params.r_max[4] = 2.0;
        let spec = generate_filter(lvl(4), &params).unwrap();

        // Oracle: constant radius 2, round every sample, first distinct cells.
        let mut expected = vec![Offset::CENTER];
        for t in params.thetas() {
            let cell = Offset::new((2.0 * t.sin()).round() as i32, (2.0 * t.cos()).round() as i32);
            if !expected.contains(&cell) && expected.len() < params.cell_count {
                expected.push(cell);
            }
        }
        assert_eq!(spec.offsets(), expected.as_slice());
        for o in &spec.offsets()[1..] {
            assert!((o.norm() - 2.0).abs() <= std::f64::consts::FRAC_1_SQRT_2 + 1e-12, "{o}");
        }
    }

    #[test]
    fn scattered_beats_concentrated() {
        let params = SpiralParams::default();
        let top = generate_filter(lvl(0), &params).unwrap();
        let low = generate_filter(lvl(6), &params).unwrap();
        assert!(top.mean_norm() > low.mean_norm());
    }

    #[test]
    fn insufficient_density_names_level() {
        let params = SpiralParams {
            cell_count: 30,
            theta_samples: 30,
            ..SpiralParams::default()
        };
        match generate_filter(lvl(7), &params) {
            Err(Error::Generation { level, .. }) => assert_eq!(level, 7),
            other => panic!("expected generation error, got {other:?}"),
        }
    }

    #[test]
    fn params_validation() {
        let bad_alpha = SpiralParams {
            alpha: 1.0,
            ..SpiralParams::default()
        };
        assert!(bad_alpha.validate().is_err());
        let sparse = SpiralParams {
            theta_samples: 4,
            ..SpiralParams::default()
        };
        assert!(sparse.validate().is_err());
        let mut neg = SpiralParams::default();
        neg.r_max[2] = 0.0;
        assert!(neg.validate().is_err());
    }

    #[test]
    fn parse_normal_block() {
        let text =
            "# normal filter\nlevel 8 cells 9 extent 3\n-1 -1\n-1 0\n-1 1\n0 -1\n0 0 # anchor\n0 1\n1 -1\n1 0\n1 1\n";
        let specs = parse_filter_specs(text).unwrap();
        assert_eq!(specs[&EquilibriumLevel::NORMAL], FilterSpec::normal());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dup = "level 2 cells 3 extent 3\n0 0\n1 1\n1 1\n";
        match parse_filter_specs(dup) {
            Err(Error::FilterSpecParse { line, reason }) => {
                assert_eq!(line, 4);
                assert!(reason.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
        let no_center = "\nlevel 2 cells 2 extent 3\n1 0\n0 1\n";
        assert!(matches!(
            parse_filter_specs(no_center),
            Err(Error::FilterSpecParse { line: 2, .. })
        ));
        let malformed = "level 1 cells 1 extent 1\n0 zero\n";
        assert!(matches!(
            parse_filter_specs(malformed),
            Err(Error::FilterSpecParse { line: 2, .. })
        ));
        let orphan = "0 0\n";
        assert!(matches!(
            parse_filter_specs(orphan),
            Err(Error::FilterSpecParse { line: 1, .. })
        ));
        let short = "level 1 cells 3 extent 3\n0 0\n0 1\n";
        assert!(matches!(
            parse_filter_specs(short),
            Err(Error::FilterSpecParse { line: 1, .. })
        ));
        let narrow = "level 1 cells 2 extent 1\n0 0\n0 1\n";
        assert!(parse_filter_specs(narrow).is_err());
    }

    #[test]
    fn generated_specs_round_trip_through_text() {
        let params = SpiralParams::default();
        let specs: Vec<FilterSpec> = EquilibriumLevel::all()
            .map(|l| generate_filter(l, &params).unwrap())
            .collect();
        let parsed = parse_filter_specs(&format_filter_specs(&specs)).unwrap();
        assert_eq!(parsed.len(), LEVEL_COUNT);
        for spec in &specs {
            assert_eq!(&parsed[&spec.level()], spec);
        }
    }

    #[test]
    fn spiral_csv_has_one_row_per_sample() {
        let params = SpiralParams::default();
        let pts = spiral_points(1.0, params.alpha, params.auto_beta(lvl(0)), &params).unwrap();
        assert_eq!(pts.len(), params.theta_samples);
        let csv = spiral_points_csv(&pts);
        assert_eq!(csv.lines().count(), params.theta_samples + 1);
        // auto-β puts the largest radius exactly at r_max.
        let peak = pts.iter().map(|p| p.radius).fold(0.0, f64::max);
        assert!((peak - params.r_max[0]).abs() < 1e-12);
    }
}
