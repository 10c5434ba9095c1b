use super::frames::{check_frame, stack_padded, unstack_cropped};
use super::{Checkpoint, Generator};
use crate::Result;

/// Denoised frames plus a flag raised when inputs do not look normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutput {
    pub frames: Vec<Vec<f32>>,
    pub unnormalized_input: bool,
}

/// Heuristic: normalised frames are near zero mean and within a few units.
pub fn looks_unnormalized(frames: &[Vec<f32>]) -> bool {
    let (mut sum, mut n, mut max_abs) = (0.0f64, 0usize, 0.0f32);
    for f in frames {
        for &v in f {
            sum += v as f64;
            max_abs = max_abs.max(v.abs());
        }
        n += f.len();
    }
    n > 0 && ((sum / n as f64).abs() > 1.0 || max_abs > 20.0)
}

/// Runs the generator over `frames` (each `h x w`) in mini-batches.
pub fn denoise_frames(
    generator: &Generator<f32>,
    frames: &[Vec<f32>],
    h: usize,
    w: usize,
    batch_size: usize,
) -> Result<Vec<Vec<f32>>> {
    check_frame(h, w)?;
    for f in frames {
        if f.len() != h * w {
            return Err(crate::Error::Shape(format!(
                "frame of {} pixels, expected {h}x{w}",
                f.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(batch_size.max(1)) {
        let refs: Vec<&[f32]> = chunk.iter().map(|f| f.as_slice()).collect();
        let y = generator.infer(&stack_padded::<f32>(&refs, h, w));
        out.extend(unstack_cropped(&y, h, w));
    }
    Ok(out)
}

pub fn denoise(
    checkpoint: &Checkpoint,
    frames: &[Vec<f32>],
    h: usize,
    w: usize,
    batch_size: usize,
) -> Result<DenoiseOutput> {
    Ok(DenoiseOutput {
        frames: denoise_frames(&checkpoint.generator, frames, h, w, batch_size)?,
        unnormalized_input: looks_unnormalized(frames),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::GeneratorConfig;
    use crate::seed;
    use crate::Error;

    #[test]
    fn batch_size_does_not_change_outputs() {
        let g = Generator::<f32>::new(GeneratorConfig::with_width(0.05), &mut seed::rng(3));
        let frames: Vec<Vec<f32>> = (0..5)
            .map(|k| (0..10 * 9).map(|i| ((i + k) % 5) as f32 * 0.2).collect())
            .collect();
        let one = denoise_frames(&g, &frames, 10, 9, 1).unwrap();
        let all = denoise_frames(&g, &frames, 10, 9, 5).unwrap();
        assert_eq!(one.len(), 5);
        assert_eq!(one[0].len(), 90);
        for (a, b) in one.iter().flatten().zip(all.iter().flatten()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn tiny_frames_are_rejected() {
        let g = Generator::<f32>::new(GeneratorConfig::with_width(0.05), &mut seed::rng(3));
        let err = denoise_frames(&g, &[vec![0.0; 49]], 7, 7, 1);
        assert!(matches!(err, Err(Error::FrameTooSmall { .. })));
    }

    #[test]
    fn raw_counts_are_flagged() {
        assert!(looks_unnormalized(&[vec![100.0; 16]]));
        assert!(!looks_unnormalized(&[vec![0.1; 16]]));
    }
}
