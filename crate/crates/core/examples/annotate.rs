//! Builds a mask from a superpixel selection, erases part of it with a brush
//! and scores it against the ground truth.

use phasefield::annot::{compose_mask, iou, rasterize_strokes, Annotation, BrushStroke};
use phasefield::energy::ModelParams;
use phasefield::learn::pixel_accuracy;
use phasefield::sim::{render_frame, two_void_state, Channel, SynthConfig};
use phasefield::slic::{slic_segment, DEFAULT_MAX_ITER};

fn main() -> phasefield::Result<()> {
    let state = two_void_state(&SynthConfig::default(), 1, &ModelParams::reference())?;
    let truth = state.eta.threshold(0.5);
    let map = slic_segment(&render_frame(&state, Channel::Eta), 400, 10.0, DEFAULT_MAX_ITER)?;

    // pick every superpixel that is mostly void, as a careful annotator would
    let mut ann = Annotation::new("frame_000000", &map);
    let mut inside = vec![0usize; map.n_labels() as usize];
    for (p, &l) in map.labels().iter().enumerate() {
        inside[l as usize] += usize::from(truth.contains(p % map.width(), p / map.width()));
    }
    for (l, area) in map.areas().into_iter().enumerate() {
        if 2 * inside[l] > area {
            ann.toggle(l as u32);
        }
    }
    let mask = compose_mask(&map, &ann)?;
    println!(
        "{} superpixels selected: IoU {:.4}, accuracy {:.4}",
        ann.selected.len(),
        iou(&mask, &truth)?,
        pixel_accuracy(&mask, &truth)?
    );

    // a short horizontal stroke just below the top edge of the first void
    let first = (0..map.width() * map.height())
        .find(|&p| mask.contains(p % map.width(), p / map.width()))
        .expect("some void pixels");
    let (x, y) = ((first % map.width()) as f64, (first / map.width()) as f64);
    let stroke = BrushStroke {
        points: vec![[x - 4.0, y + 3.0], [x + 4.0, y + 3.0]],
        radius: 2.0,
    };
    ann.erase(&rasterize_strokes(map.width(), map.height(), &[stroke])?)?;
    let erased = compose_mask(&map, &ann)?;
    println!("after erasing a stroke: {} -> {} pixels", mask.count(), erased.count());
    println!("{}", ann.to_json());
    Ok(())
}
