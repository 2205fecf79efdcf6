//! PNG charts: training curves, ROC curves and confusion matrices.

use std::path::Path;
use std::sync::OnceLock;

use plotters::prelude::*;
use plotters::style::FontStyle;

use crate::error::{Error, Result};

const FONT_CANDIDATES: [&str; 3] = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/TTF/DejaVuSans.ttf",
    "/usr/share/fonts/dejavu/DejaVuSans.ttf",
];

/// Registers a system TrueType font for chart text. Charts are drawn
/// without text when none is found. `TLBENCH_FONT` overrides the search.
fn font_available() -> bool {
    static LOADED: OnceLock<bool> = OnceLock::new();
    *LOADED.get_or_init(|| {
        let env = std::env::var("TLBENCH_FONT").ok();
        let candidates = env.iter().map(String::as_str).chain(FONT_CANDIDATES);
        for path in candidates {
            if let Ok(bytes) = std::fs::read(path) {
                let bytes: &'static [u8] = Box::leak(bytes.into_boxed_slice());
                if plotters::style::register_font("sans-serif", FontStyle::Normal, bytes).is_ok() {
                    return true;
                }
            }
        }
        false
    })
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Plot(e.to_string())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Line chart over the joint extent of all series.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
    diagonal: bool,
) -> Result<()> {
    ensure_parent(path)?;
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-3);
    let (y0, y1) = (y0 - pad, y1 + pad);

    let text = font_available();
    let root = BitMapBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut builder = ChartBuilder::on(&root);
    builder.margin(16);
    if text {
        builder
            .caption(title, ("sans-serif", 22))
            .x_label_area_size(40)
            .y_label_area_size(56);
    }
    let mut chart = builder.build_cartesian_2d(x0..x1, y0..y1).map_err(plot_err)?;
    if text {
        chart
            .configure_mesh()
            .x_desc(x_label)
            .y_desc(y_label)
            .draw()
            .map_err(plot_err)?;
    } else {
        chart
            .configure_mesh()
            .disable_x_mesh()
            .disable_y_mesh()
            .draw()
            .map_err(plot_err)?;
    }
    if diagonal {
        chart
            .draw_series(LineSeries::new([(x0, x0), (x1, x1)], BLACK.mix(0.3)))
            .map_err(plot_err)?;
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let drawn = chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?;
        if text {
            drawn
                .label(s.name)
                .legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color.stroke_width(2)));
        }
    }
    if text && series.len() > 1 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Confusion matrix as a blue heatmap with counts in each cell.
pub fn confusion_heatmap(path: &Path, title: &str, class_names: &[String], matrix: &[Vec<u64>]) -> Result<()> {
    ensure_parent(path)?;
    let k = matrix.len();
    let max = matrix.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let text = font_available();
    let root = BitMapBackend::new(path, (560, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut builder = ChartBuilder::on(&root);
    builder.margin(16);
    if text {
        builder
            .caption(title, ("sans-serif", 22))
            .x_label_area_size(48)
            .y_label_area_size(110);
    }
    let mut chart = builder
        .build_cartesian_2d(0.0..k as f64, 0.0..k as f64)
        .map_err(plot_err)?;
    if text {
        let names = class_names.to_vec();
        let names_y = class_names.to_vec();
        chart
            .configure_mesh()
            .disable_mesh()
            .x_labels(k)
            .y_labels(k)
            .x_desc("Predicted")
            .y_desc("Actual")
            .x_label_formatter(&move |v| label_at(&names, *v))
            .y_label_formatter(&move |v| label_at(&names_y, k as f64 - 1.0 - *v))
            .draw()
            .map_err(plot_err)?;
    }
    for (i, row) in matrix.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            let shade = count as f64 / max;
            let color = RGBColor(
                (247.0 - shade * 239.0) as u8,
                (251.0 - shade * 203.0) as u8,
                (255.0 - shade * 148.0) as u8,
            );
            let y = (k - 1 - i) as f64;
            chart
                .draw_series(std::iter::once(Rectangle::new(
                    [(j as f64, y), (j as f64 + 1.0, y + 1.0)],
                    color.filled(),
                )))
                .map_err(plot_err)?;
            if text {
                let fg = if shade > 0.5 { WHITE } else { BLACK };
                chart
                    .draw_series(std::iter::once(Text::new(
                        count.to_string(),
                        (j as f64 + 0.42, y + 0.55),
                        ("sans-serif", 20).into_font().color(&fg),
                    )))
                    .map_err(plot_err)?;
            }
        }
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

fn label_at(names: &[String], v: f64) -> String {
    let idx = v.floor();
    if (v - idx - 0.5).abs() < 0.26 || v.fract() == 0.0 {
        names.get(idx as usize).cloned().unwrap_or_default()
    } else {
        String::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_pngs() {
        let dir = tempfile::tempdir().unwrap();
        let line = dir.path().join("curve.png");
        line_chart(
            &line,
            "loss",
            "epoch",
            "loss",
            &[
                Series {
                    name: "train",
                    points: vec![(1.0, 0.9), (2.0, 0.5)],
                },
                Series {
                    name: "val",
                    points: vec![(1.0, 1.0), (2.0, 0.7)],
                },
            ],
            false,
        )
        .unwrap();
        let cm = dir.path().join("cm.png");
        confusion_heatmap(
            &cm,
            "confusion",
            &["normal".into(), "covid".into()],
            &[vec![5, 1], vec![0, 7]],
        )
        .unwrap();
        for p in [line, cm] {
            let img = image::open(&p).unwrap();
            assert!(img.width() > 100);
        }
    }
}
