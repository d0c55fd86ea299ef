//! Procedural stand-in for the five scene categories.
//!
//! | class | name        | layout                                         |
//! |-------|-------------|------------------------------------------------|
//! | 0     | living room | bright rectangle on a dark background          |
//! | 1     | bathroom    | horizontal stripes                             |
//! | 2     | bedroom     | bright disk                                    |
//! | 3     | kitchen     | left-to-right intensity gradient               |
//! | 4     | action      | checkerboard                                   |
//!
//! Every template gets a seeded jitter in position, phase and brightness.
//! Additive Gaussian noise has standard deviation `10 * noise_level`. The
//! jitter draws come first on the random stream and the noise draws follow,
//! so images that differ only in noise level share the same template and
//! the same unit noise field.

use super::{Image, ImageError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SceneClass {
    LivingRoom,
    Bathroom,
    Bedroom,
    Kitchen,
    Action,
}

pub const SCENE_CLASSES: [SceneClass; 5] =
    [SceneClass::LivingRoom, SceneClass::Bathroom, SceneClass::Bedroom, SceneClass::Kitchen, SceneClass::Action];

impl SceneClass {
    pub fn from_id(id: usize) -> Result<Self, ImageError> {
        SCENE_CLASSES.get(id).copied().ok_or(ImageError::BadSceneClass(id))
    }

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SceneClass::LivingRoom => "living_room",
            SceneClass::Bathroom => "bathroom",
            SceneClass::Bedroom => "bedroom",
            SceneClass::Kitchen => "kitchen",
            SceneClass::Action => "action",
        }
    }
}

pub const NOISE_STD_PER_LEVEL: f64 = 10.0;

fn scene_rng(class: usize, size: usize, seed: u64) -> ChaCha8Rng {
    let mixed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((class as u64) << 56) ^ ((size as u64) << 24);
    ChaCha8Rng::seed_from_u64(mixed)
}

fn validate(class_id: usize, size: usize) -> Result<SceneClass, ImageError> {
    let class = SceneClass::from_id(class_id)?;
    if size < 8 {
        return Err(ImageError::SceneTooSmall(size));
    }
    Ok(class)
}

fn render(class: SceneClass, size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = size as f64;
    let jitter = (s / 10.0).max(1.0);
    let j = |rng: &mut ChaCha8Rng| rng.gen_range(-jitter..=jitter);
    let dark = 45.0 + rng.gen_range(-15.0..=15.0);
    let bright = 205.0 + rng.gen_range(-15.0..=15.0);
    let mut field = vec![0.0; size * size];
    match class {
        SceneClass::LivingRoom => {
            let x0 = s * 0.2 + j(rng);
            let x1 = s * 0.8 + j(rng);
            let y0 = s * 0.45 + j(rng);
            let y1 = s * 0.9 + j(rng) * 0.5;
            for y in 0..size {
                for x in 0..size {
                    let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                    let inside = fx >= x0 && fx < x1 && fy >= y0 && fy < y1;
                    field[y * size + x] = if inside { bright } else { dark };
                }
            }
        }
        SceneClass::Bathroom => {
            let period = (s / 4.0).max(4.0);
            let phase = rng.gen_range(0.0..period);
            for y in 0..size {
                let band = (((y as f64 + phase) / (period / 2.0)).floor() as i64).rem_euclid(2);
                for x in 0..size {
                    field[y * size + x] = if band == 0 { bright } else { dark };
                }
            }
        }
        SceneClass::Bedroom => {
            let cx = s / 2.0 + j(rng);
            let cy = s / 2.0 + j(rng);
            let r = s * 0.3 + j(rng) * 0.5;
            for y in 0..size {
                for x in 0..size {
                    let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                    field[y * size + x] = if dx * dx + dy * dy <= r * r { bright } else { dark };
                }
            }
        }
        SceneClass::Kitchen => {
            for y in 0..size {
                for x in 0..size {
                    let t = (x as f64 + 0.5) / s;
                    field[y * size + x] = dark + (bright - dark) * t;
                }
            }
        }
        SceneClass::Action => {
            let cell = (s / 4.0).max(2.0);
            let px = rng.gen_range(0.0..cell);
            let py = rng.gen_range(0.0..cell);
            for y in 0..size {
                let by = ((y as f64 + py) / cell).floor() as i64;
                for x in 0..size {
                    let bx = ((x as f64 + px) / cell).floor() as i64;
                    field[y * size + x] = if (bx + by).rem_euclid(2) == 0 { bright } else { dark };
                }
            }
        }
    }
    field
}

fn quantize(field: &[f64], size: usize) -> Image {
    let pixels = field.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    Image::gray(size, size, pixels).expect("square buffer")
}

/// Noise-free template that [`gen_scene`] perturbs.
pub fn scene_template(class_id: usize, size: usize, seed: u64) -> Result<Image, ImageError> {
    let class = validate(class_id, size)?;
    let mut rng = scene_rng(class_id, size, seed);
    Ok(quantize(&render(class, size, &mut rng), size))
}

/// Deterministic `size`×`size` grayscale scene of the given class.
pub fn gen_scene(class_id: usize, size: usize, noise_level: u8, seed: u64) -> Result<Image, ImageError> {
    let class = validate(class_id, size)?;
    if !(1..=3).contains(&noise_level) {
        return Err(ImageError::BadNoiseLevel(noise_level));
    }
    let mut rng = scene_rng(class_id, size, seed);
    let mut field = render(class, size, &mut rng);
    let sigma = NOISE_STD_PER_LEVEL * noise_level as f64;
    for v in field.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sigma * z;
    }
    Ok(quantize(&field, size))
}
