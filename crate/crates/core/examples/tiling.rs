//! Patch grid for a slide at 20x and 40x, with and without a tissue mask.

use milstat::tiling::{patch_grid, patch_size_for, GridOptions, Magnification, SlideGeometry, TissueMask};

fn main() -> milstat::Result<()> {
    let (width, height, downsample) = (4096, 3072, 16);
    // Tissue occupies the left half of the slide.
    let (mw, mh) = (width / downsample, height / downsample);
    let fg: Vec<bool> = (0..mw * mh).map(|i| (i % mw) < mw / 2).collect();
    let mask = TissueMask::new(mw, mh, downsample, fg)?;

    for mag in [Magnification::X20, Magnification::X40] {
        let geometry = SlideGeometry { slide_id: "slide-01".into(), width, height, magnification: mag };
        let all = patch_grid(&geometry, None, GridOptions::default())?;
        let tissue = patch_grid(&geometry, Some(&mask), GridOptions::default())?;
        println!(
            "{}x: patch {} px, {} tiles in grid, {} on tissue, first {:?}",
            mag.times(),
            patch_size_for(mag),
            all.len(),
            tissue.len(),
            tissue.first().map(|t| (t.x, t.y))
        );
    }
    Ok(())
}
