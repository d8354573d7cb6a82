use std::path::Path;

use plml_core::render::{read_heatmap, render, RenderStyle, CELL_PX};
use plml_core::sweep::{figure_config, sweep_discrete, sweep_sde, Execution, Figure, DISCRETE_HEADER};
use plml_core::Error;

fn write_single_cell(path: &Path, diff: f64) {
    let row = format!("0.02,3,0.06,0.01,0,0.29,1,1,0.99,1.0009,0.9996,1.0004,{diff},{},msgd", diff / 0.01);
    std::fs::write(path, format!("{DISCRETE_HEADER}\n{row}\n")).unwrap();
}

#[test]
fn heatmap_png_has_ten_pixels_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f3.csv");
    sweep_discrete(&figure_config(Figure::Three, 30), &csv, Execution::Parallel).unwrap();
    let grid = read_heatmap(&csv).unwrap();
    assert_eq!((grid.n_rows, grid.n_cols), (30, 30));
    let png = render(&csv, &dir.path().join("f3.png"), RenderStyle::Auto).unwrap();
    let img = image::open(&png).unwrap();
    assert_eq!((img.width(), img.height()), (30 * CELL_PX, 30 * CELL_PX));
}

#[test]
fn positive_difference_is_blue() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    write_single_cell(&csv, 5e-4);
    let png = render(&csv, &dir.path().join("one.png"), RenderStyle::Heatmap).unwrap();
    let img = image::open(&png).unwrap().to_rgb8();
    let [r, g, b] = img.get_pixel(CELL_PX / 2, CELL_PX / 2 + 1).0;
    assert!(b > r && b >= g, "rgb = ({r}, {g}, {b})");

    write_single_cell(&csv, -5e-4);
    let png = render(&csv, &dir.path().join("neg.png"), RenderStyle::Heatmap).unwrap();
    let [r, g, b] = image::open(&png).unwrap().to_rgb8().get_pixel(CELL_PX / 2, CELL_PX / 2 + 1).0;
    assert!(r > b && r >= g, "rgb = ({r}, {g}, {b})");
}

#[test]
fn empty_csv_is_a_parse_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    std::fs::write(&csv, "").unwrap();
    let out = dir.path().join("empty.png");
    assert!(matches!(render(&csv, &out, RenderStyle::Auto), Err(Error::Parse { .. })));
    assert!(!out.exists());

    std::fs::write(&csv, format!("{DISCRETE_HEADER}\n")).unwrap();
    assert!(matches!(render(&csv, &out, RenderStyle::Auto), Err(Error::Parse { line: 2, .. })));
    assert!(!out.exists());
}

#[test]
fn curves_render_as_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f4.csv");
    sweep_sde(&figure_config(Figure::FourA, 20), &csv, Execution::Serial).unwrap();
    let svg = render(&csv, &dir.path().join("f4.svg"), RenderStyle::Auto).unwrap();
    let text = std::fs::read_to_string(svg).unwrap();
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    assert!(text.contains("polyline") || text.contains("path"));
}
