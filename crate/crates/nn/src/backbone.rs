use rand_chacha::ChaCha8Rng;
use uwnet_tensor::{ParamSet, Result, Scalar, Tensor};

use crate::blocks::{ConvBlock, ResidualBlock};

struct Stage<T: Scalar> {
    down: ConvBlock<T>,
    res: ResidualBlock<T>,
}

impl<T: Scalar> Stage<T> {
    fn new(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize) -> Self {
        Stage {
            down: ConvBlock::new(rng, in_ch, out_ch, 3, 2, 1),
            res: ResidualBlock::new(rng, out_ch),
        }
    }

    fn forward(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        self.res.forward(&self.down.forward(x, training)?, training)
    }

    fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        self.down.register(params, &format!("{prefix}.down"))?;
        self.res.register(params, &format!("{prefix}.res"))
    }
}

/// Compact residual conv stack over RGB input. Strides 2/4/8/16/32;
/// returns the maps at strides 8, 16 and 32 (C3, C4, C5).
pub struct Backbone<T: Scalar> {
    stem: ConvBlock<T>,
    stages: [Stage<T>; 4],
    widths: (usize, usize, usize),
}

impl<T: Scalar> Backbone<T> {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        Backbone {
            stem: ConvBlock::new(rng, 3, 16, 3, 2, 1),
            stages: [
                Stage::new(rng, 16, 32),
                Stage::new(rng, 32, 64),
                Stage::new(rng, 64, 128),
                Stage::new(rng, 128, 128),
            ],
            widths: (64, 128, 128),
        }
    }

    /// Channel counts of (C3, C4, C5).
    pub fn out_channels(&self) -> (usize, usize, usize) {
        self.widths
    }

    pub fn forward(
        &self,
        x: &Tensor<T>,
        training: bool,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        let s = self.stem.forward(x, training)?;
        let s1 = self.stages[0].forward(&s, training)?;
        let c3 = self.stages[1].forward(&s1, training)?;
        let c4 = self.stages[2].forward(&c3, training)?;
        let c5 = self.stages[3].forward(&c4, training)?;
        Ok((c3, c4, c5))
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        self.stem.register(params, &format!("{prefix}.stem"))?;
        for (i, stage) in self.stages.iter().enumerate() {
            stage.register(params, &format!("{prefix}.stage{i}"))?;
        }
        Ok(())
    }
}
