//! Gnuplot scripts that render the emitted CSV files.

use std::fmt::Write as _;

use tpsim::emitter::TpsFeature;
use tpsim::maps::MapKind;

use crate::output::format_g_digits;

fn num(x: f64) -> String {
    format_g_digits(x, 6)
}

fn preamble(out: &mut String, png: &str) {
    out.push_str("# gnuplot script; run from this directory: gnuplot <script>\n");
    out.push_str("set datafile separator ','\n");
    out.push_str("set terminal pngcairo size 900,750 font ',11'\n");
    writeln!(out, "set output '{png}'").unwrap();
}

pub struct MapPlot<'a> {
    pub kind: MapKind,
    pub csv: &'a str,
    pub png: &'a str,
    pub range_ghz: f64,
    /// Sideband positions (GHz); gridlines are drawn at 0 and +-this value.
    pub sideband_ghz: f64,
    pub features: &'a [TpsFeature],
    /// Largest |log10 R| on the map; sets a color range symmetric about R = 1.
    pub log_span: f64,
}

/// Heatmap with dashed gridlines at {0, +-W}, leapfrog antidiagonals
/// nu1 + nu2 in {0, +-W} and labelled catalog features.
pub fn map_script(p: &MapPlot) -> String {
    let mut out = String::new();
    preamble(&mut out, p.png);
    let r = p.range_ghz;
    writeln!(out, "set xrange [{}:{}]\nset yrange [{}:{}]", num(-r), num(r), num(-r), num(r)).unwrap();
    out.push_str("set size square\nset xlabel 'nu_1 - nu_L (GHz)' noenhanced\nset ylabel 'nu_2 - nu_L (GHz)' noenhanced\n");
    match p.kind {
        MapKind::Tps => {
            out.push_str("set title 'g2(nu_1, nu_2, 0)' noenhanced\n");
            out.push_str("set palette defined (0 '#313695', 0.5 '#ffffbf', 1 '#a50026')\n");
        }
        MapKind::CsRatio => {
            // diverging log scale centred on R = 1; green marks R > 1
            let m = 10f64.powf(p.log_span.max(0.1));
            out.push_str("set title 'Cauchy-Schwarz ratio R' noenhanced\n");
            out.push_str("set logscale cb\n");
            writeln!(out, "set cbrange [{}:{}]", num(1.0 / m), num(m)).unwrap();
            out.push_str("set palette defined (0 '#762a83', 0.5 '#f7f7f7', 1 '#1b7837')\n");
        }
    }
    let w = p.sideband_ghz;
    for x in [-w, 0.0, w] {
        writeln!(
            out,
            "set arrow from {x},{lo} to {x},{hi} nohead dt 2 lc rgb 'gray30' front",
            x = num(x),
            lo = num(-r),
            hi = num(r)
        )
        .unwrap();
        writeln!(
            out,
            "set arrow from {lo},{y} to {hi},{y} nohead dt 2 lc rgb 'gray30' front",
            y = num(x),
            lo = num(-r),
            hi = num(r)
        )
        .unwrap();
    }
    for s in [-w, 0.0, w] {
        // nu1 + nu2 = s clipped to the plot box
        let x0 = (s - r).max(-r);
        let x1 = (s + r).min(r);
        writeln!(
            out,
            "set arrow from {},{} to {},{} nohead dt 3 lw 1.5 lc rgb 'black' front",
            num(x0),
            num(s - x0),
            num(x1),
            num(s - x1)
        )
        .unwrap();
    }
    for f in p.features {
        if f.nu1_ghz.abs() <= r && f.nu2_ghz.abs() <= r {
            writeln!(
                out,
                "set label '{}' at {},{} front noenhanced point pt 7 ps 0.5 offset 0.5,0.5",
                f.label,
                num(f.nu1_ghz),
                num(f.nu2_ghz)
            )
            .unwrap();
        }
    }
    writeln!(out, "plot '{}' skip 1 using 1:2:3 with image notitle", p.csv).unwrap();
    out
}

pub struct TraceSeries<'a> {
    pub csv: &'a str,
    pub title: &'a str,
}

/// Line traces; several series are shifted by `offset` for clarity.
pub fn trace_script(png: &str, xlabel: &str, ylabel: &str, series: &[TraceSeries], offset: f64) -> String {
    let mut out = String::new();
    preamble(&mut out, png);
    writeln!(out, "set xlabel '{xlabel}' noenhanced\nset ylabel '{ylabel}' noenhanced").unwrap();
    out.push_str("set grid\nset key top right noenhanced\n");
    if series.len() > 1 && offset > 0.0 {
        writeln!(out, "# traces offset by {} for clarity", num(offset)).unwrap();
    }
    let parts: Vec<String> = series
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let shift = if series.len() > 1 { offset * k as f64 } else { 0.0 };
            format!("'{}' skip 1 using 1:($2+{}) with lines lw 2 title '{}'", s.csv, num(shift), s.title)
        })
        .collect();
    writeln!(out, "plot {}", parts.join(", \\\n     ")).unwrap();
    out
}
