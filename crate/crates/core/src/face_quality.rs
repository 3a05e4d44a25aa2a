//! Face quality classifiers.
//!
//! * Face ANN: the nine face descriptors, z-scored with training-set
//!   statistics stored in the model, through dense layers
//!   32-64-64-32-16 (ReLU) and a sigmoid output.
//! * Face CNN: a 40x30 grayscale crop through five stride-2 3x3
//!   convolutions (96, 96, 96, 192, 192 channels, ReLU), then dense layers
//!   100-200-400-800-400-200-10 (ReLU) and a sigmoid output.
//!
//! Five stride-2 valid convolutions cannot fit a 30-row input, so the CNN
//! pads "same": 30x40 -> 15x20 -> 8x10 -> 4x5 -> 2x3 -> 1x2.

use thiserror::Error;

use crate::model::{BoundingBox, FaceFeatures, FaceObservation, Label, PictureRecord, MIN_FACE_SIDE};
use crate::pgm::GrayImage;
use crate::tinynet::{
    train, LayerSpec, NetError, NetworkModel, Padding, Standardization, Tensor, TrainConfig,
};

pub const FACE_ANN: &str = "face_ann";
pub const FACE_CNN: &str = "face_cnn";

/// Face CNN input width.
pub const FACE_INPUT_W: usize = 40;
/// Face CNN input height.
pub const FACE_INPUT_H: usize = 30;

/// Scores at or above this are classified good.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum FaceQualityError {
    #[error("face image {width}x{height} is smaller than {min}x{min}", min = MIN_FACE_SIDE)]
    UndersizedFace { width: usize, height: usize },
    #[error("{model} needs {modality}, which this face does not have")]
    MissingInput {
        model: &'static str,
        modality: &'static str,
    },
    #[error("model architecture {0:?} is not a face quality model")]
    UnknownModel(String),
    #[error("no labeled faces to evaluate or train on")]
    NoLabeledFaces,
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceQualityModelKind {
    FaceAnn,
    FaceCnn,
}

impl FaceQualityModelKind {
    pub fn of(model: &NetworkModel) -> Result<Self, FaceQualityError> {
        match model.metadata.architecture.as_str() {
            FACE_ANN => Ok(Self::FaceAnn),
            FACE_CNN => Ok(Self::FaceCnn),
            other => Err(FaceQualityError::UnknownModel(other.to_owned())),
        }
    }
}

pub fn build_face_ann(seed: u64) -> NetworkModel {
    let widths = [FaceFeatures::COUNT, 32, 64, 64, 32, 16];
    let mut layers = Vec::new();
    for w in widths.windows(2) {
        layers.push(LayerSpec::dense(w[0], w[1]));
        layers.push(LayerSpec::ReLU);
    }
    layers.push(LayerSpec::dense(16, 1));
    layers.push(LayerSpec::Sigmoid);
    NetworkModel::new(vec![FaceFeatures::COUNT], layers, FACE_ANN, seed).expect("face ANN architecture")
}

pub fn build_face_cnn(seed: u64) -> NetworkModel {
    let channels = [1, 96, 96, 96, 192, 192];
    let mut layers = Vec::new();
    for c in channels.windows(2) {
        layers.push(LayerSpec::conv(c[0], c[1], (3, 3), 2, Padding::Same));
        layers.push(LayerSpec::ReLU);
    }
    layers.push(LayerSpec::Flatten);
    let dense = [192 * 2, 100, 200, 400, 800, 400, 200, 10];
    for w in dense.windows(2) {
        layers.push(LayerSpec::dense(w[0], w[1]));
        layers.push(LayerSpec::ReLU);
    }
    layers.push(LayerSpec::dense(10, 1));
    layers.push(LayerSpec::Sigmoid);
    let mut model = NetworkModel::new(vec![1, FACE_INPUT_H, FACE_INPUT_W], layers, FACE_CNN, seed)
        .expect("face CNN architecture");
    model
        .metadata
        .notes
        .insert("conv_padding".into(), "same".into());
    model
}

/// Crops (optionally) and bilinearly resamples a face to 40x30, scaling
/// intensities to `[0, 1]`. Sample positions are corner-aligned, so the four
/// corner pixels of the source map to the four corners of the output.
pub fn preprocess_face(
    image: &GrayImage,
    crop: Option<&BoundingBox>,
) -> Result<Tensor, FaceQualityError> {
    let (x0, y0, x1, y1) = match crop {
        Some(b) => (
            (b.x_tl as usize).min(image.width()),
            (b.y_tl as usize).min(image.height()),
            (b.x_br as usize).min(image.width()),
            (b.y_br as usize).min(image.height()),
        ),
        None => (0, 0, image.width(), image.height()),
    };
    let (sw, sh) = (x1.saturating_sub(x0), y1.saturating_sub(y0));
    if sw < MIN_FACE_SIDE || sh < MIN_FACE_SIDE {
        return Err(FaceQualityError::UndersizedFace {
            width: sw,
            height: sh,
        });
    }
    let px = |x: usize, y: usize| image.get(x0 + x, y0 + y) as f64;
    let scale = |d: usize, dn: usize, sn: usize| d as f64 * (sn - 1) as f64 / (dn - 1) as f64;
    let mut out = Vec::with_capacity(FACE_INPUT_W * FACE_INPUT_H);
    for dy in 0..FACE_INPUT_H {
        let fy = scale(dy, FACE_INPUT_H, sh);
        let y = (fy.floor() as usize).min(sh - 2);
        let ty = fy - y as f64;
        for dx in 0..FACE_INPUT_W {
            let fx = scale(dx, FACE_INPUT_W, sw);
            let x = (fx.floor() as usize).min(sw - 2);
            let tx = fx - x as f64;
            let top = px(x, y) * (1.0 - tx) + px(x + 1, y) * tx;
            let bottom = px(x, y + 1) * (1.0 - tx) + px(x + 1, y + 1) * tx;
            out.push((top * (1.0 - ty) + bottom * ty) / 255.0);
        }
    }
    Ok(Tensor::new(vec![1, FACE_INPUT_H, FACE_INPUT_W], out)?)
}

/// Feature vector as fed to the Face ANN (standardized when the model carries
/// constants).
pub fn feature_input(model: &NetworkModel, features: &FaceFeatures) -> Tensor {
    let raw = features.to_array();
    let values = match &model.metadata.standardization {
        Some(s) => s.apply(&raw),
        None => raw.to_vec(),
    };
    Tensor::vector(values).expect("finite features")
}

pub fn face_input(model: &NetworkModel, face: &FaceObservation) -> Result<Tensor, FaceQualityError> {
    match FaceQualityModelKind::of(model)? {
        FaceQualityModelKind::FaceAnn => Ok(feature_input(model, &face.features)),
        FaceQualityModelKind::FaceCnn => {
            let img = face.face_image.as_ref().ok_or(FaceQualityError::MissingInput {
                model: FACE_CNN,
                modality: "a face image",
            })?;
            preprocess_face(img, None)
        }
    }
}

/// Face quality `r` in `[0, 1]`.
pub fn score_face(model: &NetworkModel, face: &FaceObservation) -> Result<f64, FaceQualityError> {
    Ok(model.forward(&face_input(model, face)?)?)
}

/// Scores every face of the picture in place.
pub fn score_faces(model: &NetworkModel, picture: &mut PictureRecord) -> Result<(), FaceQualityError> {
    for face in &mut picture.faces {
        face.score = Some(score_face(model, face)?);
    }
    Ok(())
}

/// Trains a fresh Face ANN on labeled faces. Standardization constants are
/// fitted on these faces and stored in the model.
pub fn train_face_ann<'a>(
    faces: impl IntoIterator<Item = &'a FaceObservation>,
    init_seed: u64,
    config: &TrainConfig,
) -> Result<(NetworkModel, Vec<f64>), FaceQualityError> {
    let labeled: Vec<(&FaceFeatures, Label)> = faces
        .into_iter()
        .filter_map(|f| f.label.map(|l| (&f.features, l)))
        .collect();
    if labeled.is_empty() {
        return Err(FaceQualityError::NoLabeledFaces);
    }
    let rows: Vec<Vec<f64>> = labeled.iter().map(|(f, _)| f.to_array().to_vec()).collect();
    let mut model = build_face_ann(init_seed);
    model.metadata.standardization = Standardization::fit(&rows);
    let samples: Vec<(Tensor, f64)> = labeled
        .iter()
        .map(|(f, l)| (feature_input(&model, f), l.target()))
        .collect();
    let out = train(&model, &samples, config)?;
    Ok((out.model, out.loss_history))
}

/// Trains a fresh Face CNN on labeled faces that carry an image.
pub fn train_face_cnn<'a>(
    faces: impl IntoIterator<Item = &'a FaceObservation>,
    init_seed: u64,
    config: &TrainConfig,
) -> Result<(NetworkModel, Vec<f64>), FaceQualityError> {
    let mut samples = Vec::new();
    for f in faces {
        if let (Some(img), Some(label)) = (&f.face_image, f.label) {
            samples.push((preprocess_face(img, None)?, label.target()));
        }
    }
    if samples.is_empty() {
        return Err(FaceQualityError::NoLabeledFaces);
    }
    let out = train(&build_face_cnn(init_seed), &samples, config)?;
    Ok((out.model, out.loss_history))
}

/// Fraction of labeled faces whose predicted class (`r >= 0.5`) matches the label.
pub fn evaluate_face_model<'a>(
    model: &NetworkModel,
    faces: impl IntoIterator<Item = &'a FaceObservation>,
) -> Result<f64, FaceQualityError> {
    let (mut total, mut hits) = (0usize, 0usize);
    for f in faces {
        let Some(label) = f.label else { continue };
        let r = score_face(model, f)?;
        total += 1;
        if (r >= DECISION_THRESHOLD) == label.is_good() {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(FaceQualityError::NoLabeledFaces);
    }
    Ok(hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tinynet::Optimizer;

    fn gradient_image(w: usize, h: usize) -> GrayImage {
        let mut img = GrayImage::new(w, h, 0);
        for y in 0..h {
            for x in 0..w {
                img.set(x, y, ((x * 7 + y * 13) % 256) as u8);
            }
        }
        img
    }

    #[test]
    fn face_ann_parameter_count() {
        let oracle: usize = [(9, 32), (32, 64), (64, 64), (64, 32), (32, 16), (16, 1)]
            .iter()
            .map(|(i, o)| i * o + o)
            .sum();
        assert_eq!(oracle, 9217);
        assert_eq!(build_face_ann(0).parameter_count(), oracle);
    }

    #[test]
    fn face_cnn_size_chain() {
        // stride-2 "same" output side is ceil(n / 2)
        let chain = |mut n: usize| {
            for _ in 0..5 {
                n = n.div_ceil(2);
            }
            n
        };
        let (h, w) = (chain(30), chain(40));
        assert_eq!((h, w), (1, 2));
        let m = build_face_cnn(0);
        let flatten_at = m.layers().iter().position(|l| *l == LayerSpec::Flatten).unwrap();
        assert_eq!(m.activation_shapes()[flatten_at], vec![192, h, w]);
        assert_eq!(m.activation_shapes()[flatten_at + 1], vec![192 * h * w]);
        assert_eq!(192 * h * w, 384);
        let dense_widths: Vec<usize> = m
            .layers()
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Dense { out_units, .. } => Some(*out_units),
                _ => None,
            })
            .collect();
        assert_eq!(dense_widths, vec![100, 200, 400, 800, 400, 200, 10, 1]);
        assert_eq!(m.metadata.notes["conv_padding"], "same");
    }

    #[test]
    fn outputs_are_probabilities() {
        let ann = build_face_ann(3);
        let f = FaceObservation::new(
            BoundingBox::new(0, 0, 40, 40).unwrap(),
            FaceFeatures::from_array([10.0, -5.0, 30.0, 0.9, 0.1, 0.0, 0.2, 0.5, 0.3]),
        );
        let r = score_face(&ann, &f).unwrap();
        assert!(r > 0.0 && r < 1.0);
        assert_eq!(score_face(&ann, &f).unwrap(), r);
        assert_eq!(score_face(&ann.zeroed(), &f).unwrap(), 0.5);

        let cnn = build_face_cnn(4);
        let mut with_img = f.clone();
        with_img.face_image = Some(gradient_image(40, 30));
        let a = score_face(&cnn, &with_img).unwrap();
        assert!(a > 0.0 && a < 1.0);
        assert_eq!(score_face(&cnn, &with_img).unwrap(), a);
    }

    #[test]
    fn cnn_requires_image() {
        let f = FaceObservation::new(BoundingBox::new(0, 0, 40, 40).unwrap(), FaceFeatures::from_array([0.0; 9]));
        assert!(matches!(
            score_face(&build_face_cnn(0), &f),
            Err(FaceQualityError::MissingInput { .. })
        ));
    }

    #[test]
    fn preprocess_identity_and_corners() {
        let img = gradient_image(40, 30);
        let t = preprocess_face(&img, None).unwrap();
        for (v, p) in t.data().iter().zip(img.pixels()) {
            assert!((v - *p as f64 / 255.0).abs() < 1e-12);
        }
        let big = gradient_image(80, 60);
        let t = preprocess_face(&big, None).unwrap();
        let at = |x: usize, y: usize| t.data()[y * FACE_INPUT_W + x];
        assert_eq!(at(0, 0), big.get(0, 0) as f64 / 255.0);
        assert_eq!(at(39, 0), big.get(79, 0) as f64 / 255.0);
        assert_eq!(at(0, 29), big.get(0, 59) as f64 / 255.0);
        assert_eq!(at(39, 29), big.get(79, 59) as f64 / 255.0);
    }

    #[test]
    fn preprocess_rejects_small_faces() {
        assert!(matches!(
            preprocess_face(&GrayImage::new(20, 20, 0), None),
            Err(FaceQualityError::UndersizedFace { width: 20, height: 20 })
        ));
        let bbox = BoundingBox::new(0, 0, 25, 40).unwrap();
        assert!(preprocess_face(&GrayImage::new(100, 100, 0), Some(&bbox)).is_err());
        let bbox = BoundingBox::new(10, 10, 60, 50).unwrap();
        assert!(preprocess_face(&GrayImage::new(100, 100, 0), Some(&bbox)).is_ok());
    }

    #[test]
    fn resample_twice_matches_direct() {
        let big = gradient_image(80, 60);
        let direct = preprocess_face(&big, None).unwrap();
        let small = GrayImage::from_raw(
            FACE_INPUT_W,
            FACE_INPUT_H,
            direct.data().iter().map(|v| (v * 255.0).round() as u8).collect(),
        )
        .unwrap();
        let twice = preprocess_face(&small, None).unwrap();
        for (a, b) in direct.data().iter().zip(twice.data()) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn evaluate_requires_labels() {
        let f = FaceObservation::new(BoundingBox::new(0, 0, 40, 40).unwrap(), FaceFeatures::from_array([0.0; 9]));
        assert!(matches!(
            evaluate_face_model(&build_face_ann(0), [&f]),
            Err(FaceQualityError::NoLabeledFaces)
        ));
        let mut good = f.clone();
        good.label = Some(Label::Good);
        // zero model outputs exactly 0.5, which counts as good
        assert_eq!(evaluate_face_model(&build_face_ann(0).zeroed(), [&good]).unwrap(), 1.0);
        let mut bad = f;
        bad.label = Some(Label::Bad);
        assert_eq!(evaluate_face_model(&build_face_ann(0).zeroed(), [&bad]).unwrap(), 0.0);
    }

    #[test]
    fn face_cnn_takes_a_training_step() {
        let faces: Vec<FaceObservation> = (0..4)
            .map(|i| {
                let mut f = FaceObservation::new(
                    BoundingBox::new(0, 0, 40, 30).unwrap(),
                    FaceFeatures::from_array([0.0; 9]),
                );
                f.face_image = Some(GrayImage::new(40, 30, if i % 2 == 0 { 220 } else { 30 }));
                f.label = Some(Label::from_good(i % 2 == 0));
                f
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            learning_rate: 0.01,
            optimizer: Optimizer::Sgd,
            seed: 1,
            ..Default::default()
        };
        let (model, history) = train_face_cnn(&faces, 5, &cfg).unwrap();
        assert_eq!(history.len(), 2);
        assert_eq!(model.metadata.epochs, 2);
    }
}
