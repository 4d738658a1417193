use crate::raster::GrayImage;
use crate::sim::{Channel, PhaseState};

/// Linear map from `[lo, hi]` to gray `0..=255`, clamped, rounding half up.
pub fn render_frame(state: &PhaseState, channel: Channel) -> GrayImage {
    render_frame_range(state, channel, 0.0, 1.0)
}

pub fn render_frame_range(state: &PhaseState, channel: Channel, lo: f64, hi: f64) -> GrayImage {
    let field = state.field(channel);
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let pixels = field
        .values()
        .iter()
        .map(|&v| ((v - lo) * scale + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(field.width(), field.height(), pixels).expect("field shape")
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}
