//! PNG learning curves and visitation heatmaps.
//!
//! Text (titles, axis labels, legend) is drawn only when a TrueType font can
//! be found on the system; set `EIGENOPT_FONT` to point at one explicitly.
//! Without a font the same pictures are drawn without text.

use std::path::Path;
use std::sync::OnceLock;

use plotters::prelude::*;
use plotters::style::{register_font, FontStyle};

use crate::error::{Error, Result};
use crate::evaluation::AggregateCurve;

const FONT_CANDIDATES: [&str; 5] = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/TTF/DejaVuSans.ttf",
    "/usr/share/fonts/dejavu/DejaVuSans.ttf",
    "/System/Library/Fonts/Supplemental/Arial.ttf",
    "C:\\Windows\\Fonts\\arial.ttf",
];

/// Line colours, in series order.
pub const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(23, 190, 207),
];

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

/// Registers a system font once; returns whether text can be drawn.
pub fn fonts_available() -> bool {
    static FONT: OnceLock<bool> = OnceLock::new();
    *FONT.get_or_init(|| {
        let custom = std::env::var("EIGENOPT_FONT").ok();
        let paths = custom.iter().map(String::as_str).chain(FONT_CANDIDATES);
        for path in paths {
            if let Ok(bytes) = std::fs::read(path) {
                let bytes: &'static [u8] = Box::leak(bytes.into_boxed_slice());
                if register_font("sans-serif", FontStyle::Normal, bytes).is_ok() {
                    return true;
                }
            }
        }
        log::info!("no TrueType font found; plots are drawn without text");
        false
    })
}

/// One labelled curve with its band.
pub struct Series<'a> {
    pub label: &'a str,
    pub curve: &'a AggregateCurve,
}

/// Steps-to-goal against episode, one line and one shaded band per series.
pub fn learning_curve_png(path: &Path, title: &str, series: &[Series]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Validation("nothing to plot".into()));
    }
    let text = fonts_available();
    let n_episodes = series.iter().map(|s| s.curve.len()).max().unwrap_or(1).max(2);
    let y_max = series.iter().flat_map(|s| s.curve.hi.iter().copied()).fold(1.0, f64::max) * 1.05;

    let root = BitMapBackend::new(path, (960, 640)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut builder = ChartBuilder::on(&root);
    builder.margin(20);
    if text {
        builder.caption(title, ("sans-serif", 26)).x_label_area_size(45).y_label_area_size(70);
    }
    let mut chart = builder.build_cartesian_2d(1f64..n_episodes as f64, 0f64..y_max).map_err(plot_err)?;
    if text {
        chart
            .configure_mesh()
            .x_desc("episode")
            .y_desc("steps to goal")
            .light_line_style(WHITE)
            .draw()
            .map_err(plot_err)?;
    } else {
        chart.configure_mesh().disable_mesh().x_labels(0).y_labels(0).draw().map_err(plot_err)?;
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let c = s.curve;
        let x = |k: usize| (k + 1) as f64;
        let band: Vec<(f64, f64)> = (0..c.len())
            .map(|k| (x(k), c.lo[k]))
            .chain((0..c.len()).rev().map(|k| (x(k), c.hi[k])))
            .collect();
        chart.draw_series(std::iter::once(Polygon::new(band, color.mix(0.2).filled()))).map_err(plot_err)?;
        let line = chart
            .draw_series(LineSeries::new((0..c.len()).map(|k| (x(k), c.stat[k])), color.stroke_width(2)))
            .map_err(plot_err)?;
        if text {
            line.label(s.label).legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        }
    }
    if text {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .label_font(("sans-serif", 16))
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Cell colour for a normalized visitation in `[0, 1]`: white to dark red.
pub fn heat_color(v: f64) -> RGBColor {
    let v = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    RGBColor(lerp(255.0, 120.0), lerp(255.0, 0.0), lerp(255.0, 0.0))
}

const WALL: RGBColor = RGBColor(60, 60, 60);
const CELL: i32 = 24;

/// Visitation heatmap of a parsed snapshot grid with a black dot on every
/// positive-value state.
pub fn heatmap_png(path: &Path, title: &str, grid: &[Vec<Option<(f64, bool)>>]) -> Result<()> {
    let rows = grid.len() as i32;
    let cols = grid.iter().map(Vec::len).max().unwrap_or(0) as i32;
    if rows == 0 || cols == 0 {
        return Err(Error::Validation("empty snapshot grid".into()));
    }
    let text = fonts_available();
    let top = if text { 30 } else { 0 };
    let root = BitMapBackend::new(path, ((cols * CELL) as u32, (rows * CELL + top) as u32)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    if text {
        root.draw(&Text::new(title.to_string(), (4, 6), ("sans-serif", 16))).map_err(plot_err)?;
    }
    for (r, line) in grid.iter().enumerate() {
        for c in 0..cols as usize {
            let (x0, y0) = (c as i32 * CELL, r as i32 * CELL + top);
            let cell = line.get(c).copied().flatten();
            let fill = cell.map_or(WALL, |(v, _)| heat_color(v));
            root.draw(&Rectangle::new([(x0, y0), (x0 + CELL, y0 + CELL)], fill.filled())).map_err(plot_err)?;
            if cell.is_some() {
                root.draw(&Rectangle::new([(x0, y0), (x0 + CELL, y0 + CELL)], RGBColor(200, 200, 200)))
                    .map_err(plot_err)?;
            }
            if let Some((_, true)) = cell {
                root.draw(&Circle::new((x0 + CELL / 2, y0 + CELL / 2), CELL / 5, BLACK.filled())).map_err(plot_err)?;
            }
        }
    }
    root.present().map_err(plot_err)?;
    Ok(())
}
