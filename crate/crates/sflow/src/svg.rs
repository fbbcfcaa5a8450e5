//! Deterministic SVG heatmaps of scan results.

use std::fmt::Write as _;

use sflow_core::scan::{ParameterChart, ScanResult};

/// Viridis, sampled at 256 evenly spaced points.
pub const VIRIDIS: [&str; 256] = [
    "#440154", "#440256", "#450457", "#450559", "#46075a", "#46085c", "#460a5d", "#460b5e",
    "#470d60", "#470e61", "#471063", "#471164", "#471365", "#481467", "#481668", "#481769",
    "#48186a", "#481a6c", "#481b6d", "#481c6e", "#481d6f", "#481f70", "#482071", "#482173",
    "#482374", "#482475", "#482576", "#482677", "#482878", "#482979", "#472a7a", "#472c7a",
    "#472d7b", "#472e7c", "#472f7d", "#46307e", "#46327e", "#46337f", "#463480", "#453581",
    "#453781", "#453882", "#443983", "#443a83", "#443b84", "#433d84", "#433e85", "#423f85",
    "#424086", "#424186", "#414287", "#414487", "#404588", "#404688", "#3f4788", "#3f4889",
    "#3e4989", "#3e4a89", "#3e4c8a", "#3d4d8a", "#3d4e8a", "#3c4f8a", "#3c508b", "#3b518b",
    "#3b528b", "#3a538b", "#3a548c", "#39558c", "#39568c", "#38588c", "#38598c", "#375a8c",
    "#375b8d", "#365c8d", "#365d8d", "#355e8d", "#355f8d", "#34608d", "#34618d", "#33628d",
    "#33638d", "#32648e", "#32658e", "#31668e", "#31678e", "#31688e", "#30698e", "#306a8e",
    "#2f6b8e", "#2f6c8e", "#2e6d8e", "#2e6e8e", "#2e6f8e", "#2d708e", "#2d718e", "#2c718e",
    "#2c728e", "#2c738e", "#2b748e", "#2b758e", "#2a768e", "#2a778e", "#2a788e", "#29798e",
    "#297a8e", "#297b8e", "#287c8e", "#287d8e", "#277e8e", "#277f8e", "#27808e", "#26818e",
    "#26828e", "#26828e", "#25838e", "#25848e", "#25858e", "#24868e", "#24878e", "#23888e",
    "#23898e", "#238a8d", "#228b8d", "#228c8d", "#228d8d", "#218e8d", "#218f8d", "#21908d",
    "#21918c", "#20928c", "#20928c", "#20938c", "#1f948c", "#1f958b", "#1f968b", "#1f978b",
    "#1f988b", "#1f998a", "#1f9a8a", "#1e9b8a", "#1e9c89", "#1e9d89", "#1f9e89", "#1f9f88",
    "#1fa088", "#1fa188", "#1fa187", "#1fa287", "#20a386", "#20a486", "#21a585", "#21a685",
    "#22a785", "#22a884", "#23a983", "#24aa83", "#25ab82", "#25ac82", "#26ad81", "#27ad81",
    "#28ae80", "#29af7f", "#2ab07f", "#2cb17e", "#2db27d", "#2eb37c", "#2fb47c", "#31b57b",
    "#32b67a", "#34b679", "#35b779", "#37b878", "#38b977", "#3aba76", "#3bbb75", "#3dbc74",
    "#3fbc73", "#40bd72", "#42be71", "#44bf70", "#46c06f", "#48c16e", "#4ac16d", "#4cc26c",
    "#4ec36b", "#50c46a", "#52c569", "#54c568", "#56c667", "#58c765", "#5ac864", "#5cc863",
    "#5ec962", "#60ca60", "#63cb5f", "#65cb5e", "#67cc5c", "#69cd5b", "#6ccd5a", "#6ece58",
    "#70cf57", "#73d056", "#75d054", "#77d153", "#7ad151", "#7cd250", "#7fd34e", "#81d34d",
    "#84d44b", "#86d549", "#89d548", "#8bd646", "#8ed645", "#90d743", "#93d741", "#95d840",
    "#98d83e", "#9bd93c", "#9dd93b", "#a0da39", "#a2da37", "#a5db36", "#a8db34", "#aadc32",
    "#addc30", "#b0dd2f", "#b2dd2d", "#b5de2b", "#b8de29", "#bade28", "#bddf26", "#c0df25",
    "#c2df23", "#c5e021", "#c8e020", "#cae11f", "#cde11d", "#d0e11c", "#d2e21b", "#d5e21a",
    "#d8e219", "#dae319", "#dde318", "#dfe318", "#e2e418", "#e5e419", "#e7e419", "#eae51a",
    "#ece51b", "#efe51c", "#f1e51d", "#f4e61e", "#f6e620", "#f8e621", "#fbe723", "#fde725",
];

const MASK_COLOUR: &str = "#d62728";
const UNREACHED_COLOUR: &str = "#bbbbbb";
const CELL: f64 = 4.0;
const MAX_PIXELS: f64 = 512.0;

fn colour(label: i64, lo: i64, hi: i64) -> &'static str {
    if hi == lo {
        return VIRIDIS[128];
    }
    VIRIDIS[((label - lo) * 255 / (hi - lo)) as usize]
}

/// Component labels as cells, the mask in red, a legend of the labels.
///
/// One-dimensional charts are drawn as a strip; for three axes the middle
/// slice of the last axis is shown.
pub fn scan_svg(chart: &ParameterChart, result: &ScanResult, title: &str) -> String {
    let res = chart.resolution();
    let (nx, ny) = (res[0], if res.len() > 1 { res[1] } else { 1 });
    let slice = if res.len() > 2 { res[2] / 2 } else { 0 };
    let cell = CELL.min(MAX_PIXELS / nx.max(ny) as f64).max(1.0);
    let (w, h) = (nx as f64 * cell, ny as f64 * cell);
    let labels = &result.report.labels;
    let (lo, hi) = (labels.first().copied().unwrap_or(0), labels.last().copied().unwrap_or(0));
    let legend_w = 120.0;
    let total_w = w + legend_w + 30.0;
    let total_h = (h + 50.0).max(40.0 + 18.0 * labels.len() as f64 + 40.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.0}" height="{total_h:.0}" viewBox="0 0 {total_w:.0} {total_h:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="10" y="20" font-family="monospace" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(s, r#"<g transform="translate(10,35)" shape-rendering="crispEdges">"#);
    for j in 0..ny {
        for i in 0..nx {
            let mut idx = vec![i];
            if res.len() > 1 {
                idx.push(j);
            }
            if res.len() > 2 {
                idx.push(slice);
            }
            let k = chart.flat_index(&idx);
            let fill = if result.mask[k] {
                MASK_COLOUR
            } else {
                result.node_label(k).map_or(UNREACHED_COLOUR, |l| colour(l, lo, hi))
            };
            // axis 1 increases upwards
            let y = (ny - 1 - j) as f64 * cell;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{fill}"/>"#,
                i as f64 * cell
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let lx = w + 25.0;
    let _ = writeln!(s, r#"<g transform="translate({lx:.0},35)" font-family="monospace" font-size="12">"#);
    let _ = writeln!(s, r#"<text x="0" y="0">labels</text>"#);
    for (n, &l) in labels.iter().enumerate() {
        let y = 10.0 + 18.0 * n as f64;
        let _ = writeln!(s, r#"<rect x="0" y="{y:.0}" width="12" height="12" fill="{}"/>"#, colour(l, lo, hi));
        let _ = writeln!(s, r#"<text x="18" y="{:.0}">{l}</text>"#, y + 10.0);
    }
    let y = 10.0 + 18.0 * labels.len() as f64;
    let _ = writeln!(s, r#"<rect x="0" y="{y:.0}" width="12" height="12" fill="{MASK_COLOUR}"/>"#);
    let _ = writeln!(s, r#"<text x="18" y="{:.0}">mask</text>"#, y + 10.0);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use sflow_core::family::registry;
    use sflow_core::scan::{scan, FamilyModel};

    #[test]
    fn table_is_well_formed() {
        assert_eq!(VIRIDIS[0], "#440154");
        assert_eq!(VIRIDIS[255], "#fde725");
        assert!(VIRIDIS.iter().all(|c| c.len() == 7 && c.starts_with('#')));
    }

    #[test]
    fn empty_mask_has_one_component_colour() {
        let model = FamilyModel::new(registry("positive_definite").unwrap());
        let chart = ParameterChart::new(vec![(-1.0, 1.0)], vec![16], vec![false]).unwrap();
        let r = scan(&model, &chart, &[0.0]).unwrap();
        let svg = scan_svg(&chart, &r, "positive <definite>");
        // legend swatch only
        assert_eq!(svg.matches(MASK_COLOUR).count(), 1);
        assert_eq!(svg.matches(VIRIDIS[128]).count(), 16 + 1);
        assert!(svg.contains("positive &lt;definite&gt;"));
        assert_eq!(svg, scan_svg(&chart, &r, "positive <definite>"));
    }
}
