//! Segments a rendered void frame into superpixels and writes the label map
//! and a boundary overlay.
//!
//! ```text
//! cargo run -p phasefield --example superpixels -- frame.png 400
//! ```

use phasefield::energy::ModelParams;
use phasefield::raster::GrayImage;
use phasefield::sim::{render_frame, two_void_state, Channel, SynthConfig};
use phasefield::slic::{boundaries, slic_segment, DEFAULT_MAX_ITER};

fn main() -> phasefield::Result<()> {
    let mut args = std::env::args().skip(1);
    let image = match args.next() {
        Some(path) => GrayImage::load_png(path)?,
        None => {
            let theta = ModelParams::reference();
            render_frame(&two_void_state(&SynthConfig::default(), 1, &theta)?, Channel::Eta)
        }
    };
    let k = args.next().map_or(400, |s| s.parse().expect("K must be an integer"));

    let map = slic_segment(&image, k, 10.0, DEFAULT_MAX_ITER)?;
    let areas = map.areas();
    println!(
        "{} superpixels for K = {k}, areas {}..{}",
        map.n_labels(),
        areas.iter().min().unwrap(),
        areas.iter().max().unwrap()
    );
    map.save("superpixels.json")?;

    let edges = boundaries(&map);
    let overlay = GrayImage::from_fn(image.width(), image.height(), |i, j| {
        if edges.contains(i, j) {
            255
        } else {
            image.get(i, j) / 2
        }
    });
    overlay.save_png("superpixels.png")?;
    Ok(())
}
