use rand::Rng;

use super::layers::{Conv2d, Gap, Layer, Linear};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Outputs of one forward pass: the spatial feature map before pooling and
/// the logits of the deployable head over its global average.
#[derive(Debug, Clone)]
pub struct ForwardOutput<T: Scalar = f32> {
    pub feature_map: Tensor<T>,
    pub gap_features: Tensor<T>,
    pub gap_logits: Tensor<T>,
}

#[derive(Debug, Clone)]
struct Cache<T: Scalar> {
    feature_shape: Vec<usize>,
    gap_features: Tensor<T>,
}

/// Backbone `F`, global average pooling, a deployable linear head `H` and an
/// optional auxiliary head `H'` used only for RoI logits during training.
#[derive(Debug, Clone)]
pub struct Network<T: Scalar = f32> {
    pub backbone: Vec<Layer<T>>,
    pub head: Linear<T>,
    pub aux_head: Option<Linear<T>>,
    cache: Option<Cache<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(backbone: Vec<Layer<T>>, head: Linear<T>, aux_head: Option<Linear<T>>) -> Self {
        Network {
            backbone,
            head,
            aux_head,
            cache: None,
        }
    }

    /// conv3×3 → relu → maxpool2 → conv3×3 → relu → maxpool2 → conv3×3 → relu,
    /// followed by GAP and a linear head. The auxiliary head draws from its
    /// own generator so that its presence never shifts the main init stream.
    pub fn tiny_cnn<R: Rng + ?Sized>(
        in_channels: usize,
        channels: [usize; 3],
        num_classes: usize,
        rng: &mut R,
        aux_rng: Option<&mut R>,
    ) -> Self {
        let backbone = vec![
            Layer::Conv2d(Conv2d::new(in_channels, channels[0], 3, 1, 1, rng)),
            Layer::relu(),
            Layer::maxpool(2, 2),
            Layer::Conv2d(Conv2d::new(channels[0], channels[1], 3, 1, 1, rng)),
            Layer::relu(),
            Layer::maxpool(2, 2),
            Layer::Conv2d(Conv2d::new(channels[1], channels[2], 3, 1, 1, rng)),
            Layer::relu(),
        ];
        let head = Linear::new(channels[2], num_classes, rng);
        let aux_head = aux_rng.map(|r| Linear::new(channels[2], num_classes, r));
        Network::new(backbone, head, aux_head)
    }

    pub fn num_classes(&self) -> usize {
        self.head.out_features()
    }

    pub fn feature_channels(&self) -> usize {
        self.head.in_features()
    }

    /// Statically computed feature-map shape for an input shape.
    pub fn feature_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut shape = input.to_vec();
        for layer in &self.backbone {
            shape = layer.output_shape(&shape)?;
        }
        if shape.len() != 4 || shape[1] != self.head.in_features() {
            return Err(Error::shape(
                "network head",
                &[shape.first().copied().unwrap_or(0), self.head.in_features(), 0, 0],
                &shape,
            ));
        }
        Ok(shape)
    }

    pub fn logits_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let f = self.feature_shape(input)?;
        Ok(vec![f[0], self.head.out_features()])
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<ForwardOutput<T>> {
        x.expect_rank("network forward", 4)?;
        self.feature_shape(x.shape())?;
        let mut h = x.detach();
        for layer in &mut self.backbone {
            h = layer.forward(&h)?;
        }
        let gap_features = Gap::apply(&h)?;
        let gap_logits = self.head.apply(&gap_features)?;
        self.cache = Some(Cache {
            feature_shape: h.shape().to_vec(),
            gap_features: gap_features.clone(),
        });
        Ok(ForwardOutput {
            feature_map: h,
            gap_features,
            gap_logits,
        })
    }

    /// Forward pass that leaves the model untouched.
    pub fn infer(&self, x: &Tensor<T>) -> Result<ForwardOutput<T>> {
        let mut scratch = Network {
            backbone: self.backbone.clone(),
            head: self.head.clone(),
            aux_head: None,
            cache: None,
        };
        scratch.forward(x)
    }

    /// Backpropagates `dL/dlogits` of the GAP head plus an optional extra
    /// gradient arriving directly at the feature map (the RoI branch).
    /// Returns `dL/dinput`.
    pub fn backward(
        &mut self,
        grad_logits: &Tensor<T>,
        feature_grad: Option<&Tensor<T>>,
    ) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("network backward called before forward".into()))?;
        let d_gap = self.head.backward_from(&cache.gap_features, grad_logits)?;
        let mut g = Gap::backward_for(&cache.feature_shape, &d_gap)?;
        if let Some(extra) = feature_grad {
            if extra.shape() != g.shape() {
                return Err(Error::shape("feature gradient", g.shape(), extra.shape()));
            }
            for (a, &b) in g.data_mut().iter_mut().zip(extra.data()) {
                *a += b;
            }
        }
        for layer in self.backbone.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.backbone.iter().enumerate() {
            for (name, p) in layer.params() {
                out.push((format!("backbone.{i}.{name}"), p));
            }
        }
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        if let Some(aux) = &self.aux_head {
            out.push(("aux_head.weight".into(), &aux.weight));
            out.push(("aux_head.bias".into(), &aux.bias));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.backbone.iter_mut().enumerate() {
            for (name, p) in layer.params_mut() {
                out.push((format!("backbone.{i}.{name}"), p));
            }
        }
        out.push(("head.weight".into(), &mut self.head.weight));
        out.push(("head.bias".into(), &mut self.head.bias));
        if let Some(aux) = &mut self.aux_head {
            out.push(("aux_head.weight".into(), &mut aux.weight));
            out.push(("aux_head.bias".into(), &mut aux.bias));
        }
        out
    }

    pub fn zero_grad(&mut self) {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        fn cast_linear<T: Scalar, U: Scalar>(l: &Linear<T>) -> Linear<U> {
            let mut out = Linear::zeros(l.in_features(), l.out_features());
            out.weight = l.weight.cast();
            out.bias = l.bias.cast();
            out
        }
        let backbone = self
            .backbone
            .iter()
            .map(|layer| match layer {
                Layer::Conv2d(c) => Layer::Conv2d(
                    Conv2d::from_parts(c.weight.cast(), c.bias.cast(), c.stride, c.padding)
                        .expect("source layer is well formed"),
                ),
                Layer::Linear(l) => Layer::Linear(cast_linear(l)),
                Layer::Relu(_) => Layer::relu(),
                Layer::MaxPool2d(p) => Layer::maxpool(p.kernel, p.stride),
                Layer::Gap(_) => Layer::gap(),
                Layer::Identity(_) => Layer::identity(),
            })
            .collect();
        Network::new(
            backbone,
            cast_linear(&self.head),
            self.aux_head.as_ref().map(cast_linear),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_backbone_passes_input_through() {
        let mut net = Network::<f64>::new(vec![Layer::identity()], Linear::zeros(3, 4), None);
        let x = Tensor::from_vec(&[1, 3, 2, 2], (0..12).map(f64::from).collect()).unwrap();
        let out = net.forward(&x).unwrap();
        assert_eq!(out.feature_map.data(), x.data());
        assert!(out.gap_logits.data().iter().all(|&v| v == 0.0));
        assert_eq!(out.gap_logits.shape(), &[1, 4]);
    }

    #[test]
    fn tiny_cnn_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::<f32>::tiny_cnn(3, [4, 8, 16], 10, &mut rng, None);
        assert_eq!(net.feature_shape(&[2, 3, 32, 32]).unwrap(), vec![2, 16, 8, 8]);
        assert_eq!(net.logits_shape(&[5, 3, 16, 16]).unwrap(), vec![5, 10]);
        assert!(net.feature_shape(&[2, 1, 32, 32]).is_err());
    }

    #[test]
    fn backward_requires_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::<f32>::tiny_cnn(3, [2, 2, 2], 3, &mut rng, None);
        let g = Tensor::zeros(&[1, 3]);
        assert!(matches!(net.backward(&g, None), Err(Error::State(_))));
    }

    #[test]
    fn aux_head_does_not_shift_main_init() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let mut aux = ChaCha8Rng::seed_from_u64(10);
        let plain = Network::<f32>::tiny_cnn(3, [2, 2, 2], 3, &mut a, None);
        let with_aux = Network::<f32>::tiny_cnn(3, [2, 2, 2], 3, &mut b, Some(&mut aux));
        for ((_, p), (_, q)) in plain.params().iter().zip(with_aux.params().iter()) {
            assert_eq!(p.data(), q.data());
        }
        assert!(with_aux.aux_head.is_some());
    }
}
