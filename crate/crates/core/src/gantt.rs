//! SVG Gantt rendering of a schedule trace: one lane per stream, operators
//! colored by model, barrier waits shaded.

use crate::fixed::Frac;
use crate::sim::ScheduleTrace;

const LANE_GAP: u64 = 8;
const ROW_HEIGHT: u64 = 18;
const LEFT_MARGIN: u64 = 90;
const TOP_MARGIN: u64 = 24;

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2", "#edc948", "#9c755f",
];

/// Height of a bar as a share of the lane, proportional to occupancy.
fn bar_height(occ: Frac) -> u64 {
    let h = u64::from(occ.units()) * ROW_HEIGHT / 10_000;
    h.clamp(3, ROW_HEIGHT)
}

/// Render the trace as a standalone SVG document.
pub fn trace_to_svg(trace: &ScheduleTrace, title: &str) -> String {
    let makespan = trace.makespan.max(1);
    let px_per_cycle = (900 / makespan).clamp(2, 24);
    let width = LEFT_MARGIN + makespan * px_per_cycle + 20;

    // operators of one model may overlap (decomposed siblings); stack them
    // into sub-lanes, first fit by start cycle
    let mut lanes: Vec<Vec<Vec<u64>>> = vec![Vec::new(); trace.n_models]; // per model: lane end cycles
    let mut placed: Vec<(usize, usize)> = Vec::with_capacity(trace.spans.len()); // (span, sublane)
    let mut order: Vec<usize> = (0..trace.spans.len()).collect();
    order.sort_by_key(|&i| (trace.spans[i].start, trace.spans[i].op_id.clone()));
    for &i in &order {
        let s = &trace.spans[i];
        let model_lanes = &mut lanes[s.model_idx];
        let mut lane = None;
        for (li, ends) in model_lanes.iter().enumerate() {
            if ends.last().is_none_or(|&e| e < s.start) {
                lane = Some(li);
                break;
            }
        }
        let li = match lane {
            Some(li) => li,
            None => {
                model_lanes.push(Vec::new());
                model_lanes.len() - 1
            }
        };
        model_lanes[li].push(s.end);
        placed.push((i, li));
    }
    let sublanes: Vec<usize> = lanes.iter().map(|l| l.len().max(1)).collect();
    let mut lane_tops = Vec::with_capacity(trace.n_models);
    let mut y = TOP_MARGIN;
    for &n in &sublanes {
        lane_tops.push(y);
        y += n as u64 * ROW_HEIGHT + LANE_GAP;
    }
    let height = y + 10;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"10\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{LEFT_MARGIN}\" y=\"14\" font-size=\"12\">{}</text>\n",
        xml_escape(title)
    ));

    // barrier bands
    for c in &trace.cycles {
        if c.barrier_wait {
            let x = LEFT_MARGIN + c.cycle * px_per_cycle;
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{TOP_MARGIN}\" width=\"{px_per_cycle}\" height=\"{}\" \
                 fill=\"#cccccc\" opacity=\"0.5\"/>\n",
                height - TOP_MARGIN - 10
            ));
        }
    }

    // stream labels and lane baselines
    let mut model_names: Vec<&str> = vec![""; trace.n_models];
    for s in &trace.spans {
        model_names[s.model_idx] = &s.model_id;
    }
    for (mi, &top) in lane_tops.iter().enumerate() {
        let mid = top + sublanes[mi] as u64 * ROW_HEIGHT / 2 + 4;
        svg.push_str(&format!(
            "<text x=\"4\" y=\"{mid}\">{}</text>\n",
            xml_escape(model_names[mi])
        ));
        svg.push_str(&format!(
            "<line x1=\"{LEFT_MARGIN}\" y1=\"{top}\" x2=\"{}\" y2=\"{top}\" \
             stroke=\"#eeeeee\"/>\n",
            width - 10
        ));
    }

    // operator bars
    for &(i, li) in &placed {
        let s = &trace.spans[i];
        let x = LEFT_MARGIN + s.start * px_per_cycle;
        let w = (s.end - s.start + 1) * px_per_cycle;
        let h = bar_height(s.occupancy.sm);
        let top = lane_tops[s.model_idx] + li as u64 * ROW_HEIGHT + (ROW_HEIGHT - h);
        let color = PALETTE[s.model_idx % PALETTE.len()];
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"{top}\" width=\"{w}\" height=\"{h}\" fill=\"{color}\" \
             stroke=\"#333333\" stroke-width=\"0.4\"><title>{} [{}..{}] sm={}</title></rect>\n",
            xml_escape(&s.op_id),
            s.start,
            s.end,
            s.occupancy.sm
        ));
    }

    // cluster boundaries
    for &(start, _) in trace.cluster_ranges.iter().skip(1) {
        let x = LEFT_MARGIN + start * px_per_cycle;
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{TOP_MARGIN}\" x2=\"{x}\" y2=\"{}\" stroke=\"#888888\" \
             stroke-dasharray=\"3,2\"/>\n",
            height - 10
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
