use std::collections::HashSet;

use fdf::kernel_geometry::{
    format_filter_specs, generate_filter, parse_filter_specs, spiral_points, spiral_points_csv, EquilibriumLevel,
    FilterSpec, Offset, SpiralParams,
};
use proptest::prelude::*;

fn default_specs() -> Vec<FilterSpec> {
    EquilibriumLevel::all()
        .map(|l| generate_filter(l, &SpiralParams::default()).unwrap())
        .collect()
}

fn assert_valid(spec: &FilterSpec) {
    let offsets = spec.offsets();
    assert!(offsets.contains(&Offset::CENTER));
    assert_eq!(offsets.iter().collect::<HashSet<_>>().len(), offsets.len());
    assert_eq!(spec.extent() % 2, 1);
    let half = (spec.extent() as i32 - 1) / 2;
    assert!(offsets.iter().all(|o| o.row.abs() <= half && o.col.abs() <= half));
    let reparsed = FilterSpec::with_extent(spec.level(), offsets.to_vec(), spec.extent()).unwrap();
    assert_eq!(&reparsed, spec);
}

#[test]
fn mean_norm_shrinks_toward_the_normal_filter() {
    let specs = default_specs();
    for spec in &specs {
        assert_valid(spec);
        assert_eq!(spec.cell_count(), 9);
    }
    // From e = 1 (level 0) down to e = 0.25 (level 6) the cells move inward.
    for pair in specs[..=6].windows(2) {
        assert!(
            pair[0].mean_norm() >= pair[1].mean_norm(),
            "{} < {}",
            pair[0].mean_norm(),
            pair[1].mean_norm()
        );
    }
    assert!(specs[0].mean_norm() > specs[8].mean_norm());
}

#[test]
fn mean_radius_orders_spirals_by_n() {
    let params = SpiralParams {
        alpha: 1.0,
        ..SpiralParams::default()
    };
    let ns = [-0.9, -0.5, 0.0, 0.5, 0.9];
    let means: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let pts = spiral_points(n, params.alpha, 1.0, &params).unwrap();
            assert_eq!(pts.len(), params.theta_samples);
            pts.iter().map(|p| p.radius).sum::<f64>() / pts.len() as f64
        })
        .collect();
    for w in means.windows(2) {
        assert!(w[0] < w[1], "{means:?}");
    }
}

#[test]
fn csv_has_one_row_per_sample() {
    let params = SpiralParams::default();
    let pts = spiral_points(-0.5, params.alpha, 1.0, &params).unwrap();
    let csv = spiral_points_csv(&pts);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("theta,radius,x,y"));
    assert_eq!(lines.count(), params.theta_samples);
}

#[test]
fn spec_text_round_trips() {
    let specs = default_specs();
    let text = format_filter_specs(&specs);
    let parsed = parse_filter_specs(&text).unwrap();
    assert_eq!(parsed.len(), 9);
    for spec in &specs {
        assert_eq!(&parsed[&spec.level()], spec);
    }
}

proptest! {
    #[test]
    fn generated_specs_are_valid_whenever_generation_succeeds(
        alpha in 0.05f64..1.0,
        turns in 1u32..4,
        samples in 9usize..96,
        level in 0usize..9,
    ) {
        let params = SpiralParams { alpha, turns, theta_samples: samples, ..SpiralParams::default() };
        if let Ok(spec) = generate_filter(EquilibriumLevel::new(level).unwrap(), &params) {
            assert_valid(&spec);
            prop_assert_eq!(spec.cell_count(), params.cell_count);
        }
    }
}
