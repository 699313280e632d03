//! Stochastic pellet placement.
//!
//! A pattern is a set of burrows. Each burrow owns a fan of straight trenches
//! radiating from its center, and each trench carries a string of pellets
//! spaced at the pellet distance and jittered by Gaussian noise:
//!
//! ```text
//! x_ijk = x_i + r_k cos(theta_j) + N(mu_ijk, sigma_ijk^2)
//! y_ijk = y_i + r_k sin(theta_j) + N(mu_ijk, sigma_ijk^2)
//! ```
//!
//! All `N(a, b)` in this module take a mean and a *variance*.
//!
//! Random numbers are consumed from a single stream per pattern in a fixed
//! order: burrow x, burrow y, trench count, first angle, last angle, noise
//! mean choice, then for every trench its length, its gap starts (CCR only)
//! and finally two noise draws per pellet (x before y).

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, SeededRng};

/// Generation regime of a burrow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Template {
    /// Random trench length.
    Rtl,
    /// Growing trench length.
    Gtl,
    /// Concentric rings: gaps without pellets along each trench.
    Ccr,
    /// Burrow-to-trench gap before the first pellet.
    Btg,
}

impl Template {
    pub const ALL: [Template; 4] = [Template::Rtl, Template::Gtl, Template::Ccr, Template::Btg];

    pub fn as_str(self) -> &'static str {
        match self {
            Template::Rtl => "RTL",
            Template::Gtl => "GTL",
            Template::Ccr => "CCR",
            Template::Btg => "BTG",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rtl" => Ok(Template::Rtl),
            "gtl" => Ok(Template::Gtl),
            "ccr" => Ok(Template::Ccr),
            "btg" => Ok(Template::Btg),
            other => Err(Error::invalid(format!("unknown template `{other}`"))),
        }
    }
}

/// Design parameters of one burrow (and, through `num_burrows`, of a pattern).
///
/// Lengths are in world units. Defaults are the reference values of the
/// generator: three burrows, up to 50 trenches of mean length 25, pellets
/// every 0.25 units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignParams {
    pub num_burrows: usize,
    pub burrow_coord_mean: f64,
    pub burrow_coord_variance: f64,
    pub max_trenches: usize,
    pub pellet_distance: f64,
    /// Candidate noise means; one is drawn per burrow.
    pub noise_means: Vec<f64>,
    pub noise_variance: f64,
    pub trench_length_mean: f64,
    pub trench_length_variance: f64,
    /// GTL only: increase of the mean trench length per trench.
    pub growth_rate: f64,
    /// CCR only.
    pub num_gaps: usize,
    /// CCR only.
    pub gap_width: f64,
    /// BTG only.
    pub burrow_gap: f64,
    pub template: Template,
}

impl Default for DesignParams {
    fn default() -> Self {
        DesignParams {
            num_burrows: 3,
            burrow_coord_mean: 0.0,
            burrow_coord_variance: 7.0,
            max_trenches: 50,
            pellet_distance: 0.25,
            noise_means: vec![-1.0, 0.0, 1.0],
            noise_variance: 0.3,
            trench_length_mean: 25.0,
            trench_length_variance: 1.0,
            growth_rate: 2.0,
            num_gaps: 3,
            gap_width: 4.0,
            burrow_gap: 8.0,
            template: Template::Rtl,
        }
    }
}

impl DesignParams {
    pub fn with_template(mut self, template: Template) -> Self {
        self.template = template;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("burrow_coord_mean", self.burrow_coord_mean),
            ("burrow_coord_variance", self.burrow_coord_variance),
            ("pellet_distance", self.pellet_distance),
            ("noise_variance", self.noise_variance),
            ("trench_length_mean", self.trench_length_mean),
            ("trench_length_variance", self.trench_length_variance),
            ("growth_rate", self.growth_rate),
            ("gap_width", self.gap_width),
            ("burrow_gap", self.burrow_gap),
        ];
        if let Some((name, _)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be finite")));
        }
        if self.num_burrows < 1 {
            return Err(Error::invalid("num_burrows must be at least 1"));
        }
        if self.max_trenches < 1 {
            return Err(Error::invalid("max_trenches must be at least 1"));
        }
        if self.pellet_distance <= 0.0 {
            return Err(Error::invalid("pellet_distance must be positive"));
        }
        for (name, v) in [
            ("burrow_coord_variance", self.burrow_coord_variance),
            ("noise_variance", self.noise_variance),
            ("trench_length_variance", self.trench_length_variance),
            ("gap_width", self.gap_width),
            ("burrow_gap", self.burrow_gap),
        ] {
            if v < 0.0 {
                return Err(Error::invalid(format!("{name} must be non-negative")));
            }
        }
        if self.noise_means.is_empty() || self.noise_means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid(
                "noise_means must be a non-empty set of finite values",
            ));
        }
        Ok(())
    }
}

/// Point in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One placed pellet. Indices are 1-based; `order` counts placements across
/// the whole pattern starting at 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pellet {
    pub position: Point,
    pub burrow: usize,
    pub trench: usize,
    pub index: usize,
    pub order: u64,
}

/// A CCR gap. Pellets strictly inside `(start, end)` are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub start: f64,
    pub end: f64,
}

impl Gap {
    pub fn contains_strictly(&self, r: f64) -> bool {
        self.start < r && r < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trench {
    pub index: usize,
    /// Angle reduced to `[0, 2pi)`.
    pub angle: f64,
    pub length: f64,
    /// Noise-free radial coordinates of the pellets, increasing.
    pub radial_coords: Vec<f64>,
    pub gaps: Vec<Gap>,
    pub pellet_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurrowPattern {
    pub index: usize,
    pub center: Point,
    pub template: Template,
    pub noise_mean: f64,
    pub noise_variance: f64,
    pub num_trenches: usize,
    pub trenches: Vec<Trench>,
    pub pellets: Vec<Pellet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub seed: u64,
    pub burrows: Vec<BurrowPattern>,
    pub params_per_burrow: Vec<DesignParams>,
}

impl Pattern {
    pub fn pellet_count(&self) -> usize {
        self.burrows.iter().map(|b| b.pellets.len()).sum()
    }

    pub fn pellets(&self) -> impl Iterator<Item = &Pellet> + '_ {
        self.burrows.iter().flat_map(|b| b.pellets.iter())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn normal(rng: &mut SeededRng, mean: f64, variance: f64) -> Result<f64> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::invalid(format!(
            "variance must be finite and non-negative, got {variance}"
        )));
    }
    let dist = Normal::new(mean, variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Places one pellet at radius `r` along angle `theta` from `center`, shifted
/// by independent `N(noise_mean, noise_variance)` draws on each axis.
pub fn pellet_location(
    center: Point,
    theta: f64,
    r: f64,
    noise_mean: f64,
    noise_variance: f64,
    rng: &mut SeededRng,
) -> Result<Point> {
    if r < 0.0 {
        return Err(Error::invalid(format!(
            "radial coordinate must be non-negative, got {r}"
        )));
    }
    let nx = normal(rng, noise_mean, noise_variance)?;
    let ny = normal(rng, noise_mean, noise_variance)?;
    Ok(Point::new(
        center.x + r * theta.cos() + nx,
        center.y + r * theta.sin() + ny,
    ))
}

/// Equidistant angles from `first` to `last` inclusive, interpolated on the
/// real line (no wrap-around).
pub fn trench_angles(count: usize, first: f64, last: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![first],
        n => {
            let step = (last - first) / (n - 1) as f64;
            (0..n).map(|j| first + j as f64 * step).collect()
        }
    }
}

/// Grid `offset + k * spacing` for `k = 1..=floor(length / spacing)`, minus
/// every point strictly inside one of `gaps`.
pub fn grid_excluding_gaps(offset: f64, spacing: f64, length: f64, gaps: &[Gap]) -> Vec<f64> {
    if length <= 0.0 || spacing <= 0.0 {
        return Vec::new();
    }
    let count = (length / spacing).floor() as usize;
    (1..=count)
        .map(|k| offset + k as f64 * spacing)
        .filter(|&r| !gaps.iter().any(|g| g.contains_strictly(r)))
        .collect()
}

/// Radial layout of one trench: the pellet radii and the gaps removed from it.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialLayout {
    pub coords: Vec<f64>,
    pub gaps: Vec<Gap>,
}

pub fn radial_coordinates(
    template: Template,
    params: &DesignParams,
    length: f64,
    rng: &mut SeededRng,
) -> RadialLayout {
    let offset = match template {
        Template::Btg => params.burrow_gap,
        _ => 0.0,
    };
    let gaps = match template {
        Template::Ccr => {
            let room = (length - params.gap_width).max(0.0);
            (0..params.num_gaps)
                .map(|_| {
                    let start = rng.random::<f64>() * room;
                    Gap {
                        start,
                        end: start + params.gap_width,
                    }
                })
                .collect()
        }
        _ => Vec::new(),
    };
    let coords = grid_excluding_gaps(offset, params.pellet_distance, length, &gaps);
    RadialLayout { coords, gaps }
}

/// Mean trench length for 1-based trench `j`.
pub fn trench_length_mean(template: Template, params: &DesignParams, j: usize) -> f64 {
    match template {
        Template::Gtl => {
            params.trench_length_mean + (j.saturating_sub(1)) as f64 * params.growth_rate
        }
        _ => params.trench_length_mean,
    }
}

/// Lengths are physical: negative draws become empty trenches.
pub fn clamp_length(draw: f64) -> f64 {
    draw.max(0.0)
}

pub fn sample_trench_length(
    template: Template,
    params: &DesignParams,
    j: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    let mean = trench_length_mean(template, params, j);
    Ok(clamp_length(normal(
        rng,
        mean,
        params.trench_length_variance,
    )?))
}

/// Generates burrow `index` (1-based). Pellet order stamps start at
/// `first_order`.
pub fn generate_burrow(
    params: &DesignParams,
    index: usize,
    first_order: u64,
    rng: &mut SeededRng,
) -> Result<BurrowPattern> {
    params.validate()?;
    let template = params.template;

    let center = Point::new(
        normal(rng, params.burrow_coord_mean, params.burrow_coord_variance)?,
        normal(rng, params.burrow_coord_mean, params.burrow_coord_variance)?,
    );
    let num_trenches = rng.random_range(1..=params.max_trenches);
    let theta_first = rng.random::<f64>() * TAU;
    let theta_last = rng.random::<f64>() * TAU;
    let noise_mean = params.noise_means[rng.random_range(0..params.noise_means.len())];

    let mut order = first_order;
    let mut trenches = Vec::with_capacity(num_trenches);
    let mut pellets = Vec::new();
    for (j0, theta) in trench_angles(num_trenches, theta_first, theta_last)
        .into_iter()
        .enumerate()
    {
        let j = j0 + 1;
        let length = sample_trench_length(template, params, j, rng)?;
        let layout = radial_coordinates(template, params, length, rng);
        for (k0, &r) in layout.coords.iter().enumerate() {
            let position =
                pellet_location(center, theta, r, noise_mean, params.noise_variance, rng)?;
            pellets.push(Pellet {
                position,
                burrow: index,
                trench: j,
                index: k0 + 1,
                order,
            });
            order += 1;
        }
        trenches.push(Trench {
            index: j,
            angle: theta.rem_euclid(TAU),
            length,
            pellet_count: layout.coords.len(),
            radial_coords: layout.coords,
            gaps: layout.gaps,
        });
    }

    Ok(BurrowPattern {
        index,
        center,
        template,
        noise_mean,
        noise_variance: params.noise_variance,
        num_trenches,
        trenches,
        pellets,
    })
}

/// Incremental pattern builder over one seeded stream.
///
/// [`generate_pattern`] and the guidance loop both go through this type, so a
/// guided run that never changes its settings reproduces the plain run.
pub struct PatternGenerator {
    seed: u64,
    rng: SeededRng,
    next_order: u64,
    burrows: Vec<BurrowPattern>,
    params: Vec<DesignParams>,
}

impl PatternGenerator {
    pub fn new(seed: u64) -> Self {
        PatternGenerator {
            seed,
            rng: seeded(seed),
            next_order: 0,
            burrows: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn push_burrow(&mut self, params: &DesignParams) -> Result<&BurrowPattern> {
        let index = self.burrows.len() + 1;
        let burrow = generate_burrow(params, index, self.next_order, &mut self.rng)?;
        self.next_order += burrow.pellets.len() as u64;
        self.burrows.push(burrow);
        self.params.push(params.clone());
        Ok(self.burrows.last().expect("just pushed"))
    }

    pub fn burrows(&self) -> &[BurrowPattern] {
        &self.burrows
    }

    pub fn finish(self) -> Pattern {
        Pattern {
            seed: self.seed,
            burrows: self.burrows,
            params_per_burrow: self.params,
        }
    }
}

/// One burrow per entry of `configs`, all drawn from the stream seeded by `seed`.
pub fn generate_pattern(configs: &[DesignParams], seed: u64) -> Result<Pattern> {
    if configs.is_empty() {
        return Err(Error::invalid(
            "at least one burrow configuration is required",
        ));
    }
    let mut generator = PatternGenerator::new(seed);
    for params in configs {
        generator.push_burrow(params)?;
    }
    Ok(generator.finish())
}

/// `params.num_burrows` copies of `params`.
pub fn uniform_configs(params: &DesignParams) -> Vec<DesignParams> {
    vec![params.clone(); params.num_burrows]
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn template() -> impl Strategy<Value = Template> {
        prop::sample::select(Template::ALL.to_vec())
    }

    fn light(template: Template) -> DesignParams {
        DesignParams {
            num_burrows: 1,
            max_trenches: 12,
            trench_length_mean: 14.0,
            template,
            ..DesignParams::default()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn angles_are_equidistant(count in 2usize..200, first in -20.0f64..20.0, span in -20.0f64..20.0) {
            let a = trench_angles(count, first, first + span);
            prop_assert_eq!(a.len(), count);
            let step = a[1] - a[0];
            for w in a.windows(2) {
                prop_assert!(((w[1] - w[0]) - step).abs() <= 1e-12);
            }
            prop_assert!((a[count - 1] - (first + span)).abs() <= 1e-12);
        }

        #[test]
        fn btg_pellets_keep_their_distance(seed: u64, d in 0.05f64..1.0, gap in 0.0f64..12.0) {
            let params = DesignParams {
                noise_variance: 0.0,
                noise_means: vec![0.0],
                pellet_distance: d,
                burrow_gap: gap,
                ..light(Template::Btg)
            };
            let pattern = generate_pattern(&[params], seed).unwrap();
            let b = &pattern.burrows[0];
            for p in &b.pellets {
                prop_assert!(p.position.distance(b.center) >= gap + d - 1e-9);
            }
        }

        #[test]
        fn ccr_coordinates_avoid_gaps(seed: u64, gaps in 0usize..6, width in 0.0f64..8.0) {
            let params = DesignParams { num_gaps: gaps, gap_width: width, ..light(Template::Ccr) };
            let pattern = generate_pattern(&[params], seed).unwrap();
            for t in &pattern.burrows[0].trenches {
                prop_assert_eq!(t.gaps.len(), gaps);
                for r in &t.radial_coords {
                    prop_assert!(t.gaps.iter().all(|g| !g.contains_strictly(*r)));
                }
            }
        }

        #[test]
        fn pellet_counts_follow_trench_length(seed: u64, t in template(), d in 0.05f64..2.0) {
            let params = DesignParams { trench_length_variance: 0.0, pellet_distance: d, ..light(t) };
            let pattern = generate_pattern(&[params], seed).unwrap();
            for tr in &pattern.burrows[0].trenches {
                let full = (tr.length / d).floor() as usize;
                prop_assert_eq!(tr.pellet_count, tr.radial_coords.len());
                if t == Template::Ccr {
                    prop_assert!(tr.pellet_count <= full);
                } else {
                    prop_assert_eq!(tr.pellet_count, full);
                }
            }
        }

        #[test]
        fn patterns_are_deterministic(seed: u64, t in template()) {
            let configs = vec![light(t); 2];
            prop_assert_eq!(generate_pattern(&configs, seed).unwrap(), generate_pattern(&configs, seed).unwrap());
        }
    }

    #[test]
    fn burrow_draws_have_the_configured_moments() {
        // near-zero trenches keep this cheap: only the per-burrow draws matter
        let params = DesignParams {
            trench_length_mean: 0.01,
            trench_length_variance: 0.0,
            ..DesignParams::default()
        };
        let mut generator = PatternGenerator::new(99);
        let (mut js, mut xs) = (Vec::new(), Vec::new());
        for _ in 0..10_000 {
            let b = generator.push_burrow(&params).unwrap();
            js.push(b.num_trenches as f64);
            xs.push(b.center.x);
        }
        let n = js.len() as f64;
        let mean_j = js.iter().sum::<f64>() / n;
        let var_j = js.iter().map(|j| (j - mean_j).powi(2)).sum::<f64>() / (n - 1.0);
        let expected_j = (1.0 + params.max_trenches as f64) / 2.0;
        assert!(
            (mean_j - expected_j).abs() <= 3.0 * (var_j / n).sqrt(),
            "mean J {mean_j}"
        );

        let mean_x = xs.iter().sum::<f64>() / n;
        let var_x = xs.iter().map(|x| (x - mean_x).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var_x - 7.0).abs() <= 0.15 * 7.0, "var x {var_x}");
    }
}
