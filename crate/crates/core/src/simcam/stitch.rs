//! Large-array frames assembled from small-array shots.
//!
//! Every target pixel is assigned to its nearest lattice site (its cell) and
//! copied from the same offset around the source site of that cell's tile.
//! Pixels in the outer margins read from the matching margin of the source
//! frame, so background regions keep the source statistics. Long and short
//! frames use the same tiles, which preserves pairing.

use rand::Rng;

use super::{Dataset, LatticeGeometry, ShotRecord, Splits};
use crate::seed;
use crate::{Error, Result};

pub const DEFAULT_MAX_FRAME_PX: usize = 1024;

/// Source (shot index, site index) for every target site, row-major.
pub type StitchPlan = Vec<(usize, usize)>;

fn axis_source(
    pos: usize,
    origin: usize,
    pitch: usize,
    target_sites: usize,
    src_sites: usize,
    tile_site: usize,
) -> (usize, isize) {
    let rel = pos as isize - origin as isize + (pitch / 2) as isize;
    let cell = rel
        .div_euclid(pitch as isize)
        .clamp(0, target_sites as isize - 1) as usize;
    let offset = pos as isize - (origin + cell * pitch) as isize;
    let lo = -((pitch / 2) as isize);
    let hi = ((pitch - 1) / 2) as isize;
    let src_site = if offset < lo {
        0
    } else if offset > hi {
        src_sites - 1
    } else {
        tile_site
    };
    (cell, offset + (origin + src_site * pitch) as isize)
}

/// Assembles one target frame from an explicit plan.
pub fn stitch_with_plan(
    source: &Dataset,
    plan: &[(usize, usize)],
    target_rows: usize,
    target_cols: usize,
    max_frame_px: usize,
) -> Result<ShotRecord> {
    let sg = &source.geometry;
    if target_rows < sg.rows || target_cols < sg.cols {
        return Err(Error::config(
            "stitch.target",
            "target lattice smaller than source lattice",
        ));
    }
    if plan.len() != target_rows * target_cols {
        return Err(Error::Shape(format!(
            "plan has {} tiles for a {}x{} target",
            plan.len(),
            target_rows,
            target_cols
        )));
    }
    let tg = sg.resized(target_rows, target_cols);
    if tg.image_h > max_frame_px || tg.image_w > max_frame_px {
        return Err(Error::config(
            "stitch.max_frame_px",
            format!(
                "target frame {}x{} exceeds {max_frame_px}",
                tg.image_h, tg.image_w
            ),
        ));
    }
    let duration = source.shots[plan[0].0].duration_ms;
    for &(shot, site) in plan {
        let s = source
            .shots
            .get(shot)
            .ok_or_else(|| Error::Shape(format!("no shot {shot}")))?;
        if site >= sg.num_sites() {
            return Err(Error::Shape(format!("no source site {site}")));
        }
        if (s.duration_ms - duration).abs() > 1e-9 {
            return Err(Error::config(
                "stitch.source",
                "tiles mix exposure durations",
            ));
        }
    }

    let mut long = vec![0f32; tg.num_pixels()];
    let mut short = vec![0f32; tg.num_pixels()];
    for y in 0..tg.image_h {
        for x in 0..tg.image_w {
            // the tile is fixed by the cell, the source site per axis may move to a margin
            let (cell_r, _) = axis_source(y, tg.origin_px.0, tg.pitch_px, target_rows, sg.rows, 0);
            let (cell_c, _) = axis_source(x, tg.origin_px.1, tg.pitch_px, target_cols, sg.cols, 0);
            let (shot, site) = plan[tg.site_index(cell_r, cell_c)];
            let (sr, sc) = sg.site_coords(site);
            let (_, src_y) = axis_source(y, tg.origin_px.0, tg.pitch_px, target_rows, sg.rows, sr);
            let (_, src_x) = axis_source(x, tg.origin_px.1, tg.pitch_px, target_cols, sg.cols, sc);
            let src = src_y as usize * sg.image_w + src_x as usize;
            long[y * tg.image_w + x] = source.shots[shot].long_image[src];
            short[y * tg.image_w + x] = source.shots[shot].short_image[src];
        }
    }
    let true_states = plan
        .iter()
        .map(|&(shot, site)| source.shots[shot].true_states[site])
        .collect();
    Ok(ShotRecord {
        true_states,
        long_image: long,
        short_image: short,
        duration_ms: duration,
        seed: 0,
    })
}

/// Random tiling drawn from `indices` (shots of one duration).
pub fn stitch_array(
    source: &Dataset,
    indices: &[usize],
    target_rows: usize,
    target_cols: usize,
    rng_seed: u64,
    max_frame_px: usize,
) -> Result<ShotRecord> {
    if indices.is_empty() {
        return Err(Error::EmptySplit("stitch source".into()));
    }
    let mut rng = seed::rng(rng_seed);
    let sites = source.geometry.num_sites();
    let plan: StitchPlan = (0..target_rows * target_cols)
        .map(|_| {
            (
                indices[rng.random_range(0..indices.len())],
                rng.random_range(0..sites),
            )
        })
        .collect();
    let mut shot = stitch_with_plan(source, &plan, target_rows, target_cols, max_frame_px)?;
    shot.seed = rng_seed;
    Ok(shot)
}

/// `count` stitched frames; all shots land in the test split.
pub fn stitch_dataset(
    source: &Dataset,
    indices: &[usize],
    target_rows: usize,
    target_cols: usize,
    count: usize,
    base_seed: u64,
    max_frame_px: usize,
) -> Result<Dataset> {
    let shots = (0..count)
        .map(|k| {
            stitch_array(
                source,
                indices,
                target_rows,
                target_cols,
                seed::derive(base_seed, k as u64),
                max_frame_px,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut durations: Vec<f64> = shots.iter().map(|s| s.duration_ms).collect();
    durations.dedup();
    Ok(Dataset {
        geometry: source.geometry.resized(target_rows, target_cols),
        optics: source.optics,
        durations,
        shots,
        splits: Splits {
            test: (0..count).collect(),
            ..Splits::default()
        },
        norm: source.norm,
    })
}

/// Plan that reproduces shot `shot` exactly when the target equals the source.
pub fn identity_plan(geometry: &LatticeGeometry, shot: usize) -> StitchPlan {
    (0..geometry.num_sites()).map(|site| (shot, site)).collect()
}
