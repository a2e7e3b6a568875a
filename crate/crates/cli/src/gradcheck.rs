use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uwnet_loss::{classification_loss, confidence_loss, eiou_loss_components, simsiam_loss};
use uwnet_nn::DeformConvModule;
use uwnet_tensor::gradcheck::finite_diff_check;
use uwnet_tensor::{bilinear_sample, conv2d, matmul, maxpool2d, BatchNorm2d, Result, Shape, Tensor};

/// Maximum accepted relative error between reverse-mode and central
/// finite-difference gradients, in f64.
pub const TOLERANCE: f64 = 1e-4;

const STEP: f64 = 1e-5;
const MAX_COORDS: usize = 64;

#[derive(Clone, Debug)]
pub struct OpReport {
    pub op: String,
    pub err: f64,
}

impl OpReport {
    pub fn pass(&self) -> bool {
        self.err < TOLERANCE
    }
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: Shape, lo: f64, hi: f64) -> Tensor<f64> {
    let data: Vec<f64> = (0..shape.numel()).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::leaf(shape, data).expect("shape/data agree by construction")
}

fn rand_constant(rng: &mut ChaCha8Rng, shape: Shape, lo: f64, hi: f64) -> Tensor<f64> {
    let data: Vec<f64> = (0..shape.numel()).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::constant(shape, data).expect("shape/data agree by construction")
}

/// Reduces a non-scalar op output to a scalar with a fixed random weight
/// tensor, so every output coordinate influences the checked gradient.
fn weighted_sum(out: &Tensor<f64>, weights: &Tensor<f64>) -> Result<Tensor<f64>> {
    Ok(out.mul(weights)?.sum())
}

fn check(
    reports: &mut Vec<OpReport>,
    op: &str,
    t: &Tensor<f64>,
    f: impl Fn(&Tensor<f64>) -> Result<Tensor<f64>>,
) -> Result<()> {
    let err = finite_diff_check(f, t, STEP, MAX_COORDS)?;
    reports.push(OpReport { op: op.to_string(), err });
    Ok(())
}

fn merge_worst(reports: &mut Vec<OpReport>, n: usize, op: &str) {
    let tail: Vec<OpReport> = reports.split_off(reports.len() - n);
    let err = tail.iter().map(|r| r.err).fold(0.0, f64::max);
    reports.push(OpReport { op: op.to_string(), err });
}

/// Runs the finite-difference gradient audit over every differentiable
/// operation, one report per op, worst sampled coordinate each.
pub fn run_suite() -> Result<Vec<OpReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut reports = Vec::new();

    // convolution at each dilation, checked against both input and weight
    for dilation in 1..=3usize {
        let x = rand_tensor(&mut rng, Shape::new(2, 3, 8, 8), -1.0, 1.0);
        let w = rand_tensor(&mut rng, Shape::new(4, 3, 3, 3), -0.5, 0.5);
        let b = rand_constant(&mut rng, Shape::new(1, 4, 1, 1), -0.2, 0.2);
        let wc = rand_constant(&mut rng, Shape::new(4, 3, 3, 3), -0.5, 0.5);
        let xc = rand_constant(&mut rng, Shape::new(2, 3, 8, 8), -1.0, 1.0);
        let mix = rand_constant(&mut rng, Shape::new(2, 4, 8, 8), -1.0, 1.0);
        let (bi, mi) = (b.clone(), mix.clone());
        check(&mut reports, "tmp", &x, move |t| {
            weighted_sum(&conv2d(t, &wc, Some(&bi), 1, dilation, dilation)?, &mi)
        })?;
        let (bi, mi) = (b.clone(), mix.clone());
        check(&mut reports, "tmp", &w, move |t| {
            weighted_sum(&conv2d(&xc, t, Some(&bi), 1, dilation, dilation)?, &mi)
        })?;
        merge_worst(&mut reports, 2, &format!("conv2d_dilation{dilation}"));
    }

    // max pooling; random continuous inputs keep the argmax away from ties
    let x = rand_tensor(&mut rng, Shape::new(2, 3, 9, 9), -1.0, 1.0);
    let mix = rand_constant(&mut rng, Shape::new(2, 3, 5, 5), -1.0, 1.0);
    check(&mut reports, "maxpool2d", &x, move |t| {
        weighted_sum(&maxpool2d(t, 3, 2, 1)?, &mix)
    })?;

    // bilinear sampling: gradients into both the feature map and the
    // coordinates; coordinates sit strictly between grid lines
    let feat = rand_tensor(&mut rng, Shape::new(1, 2, 5, 5), -1.0, 1.0);
    let pts = rand_tensor(&mut rng, Shape::new(1, 4, 3, 3), 0.3, 3.7);
    let featc = rand_constant(&mut rng, Shape::new(1, 2, 5, 5), -1.0, 1.0);
    let ptsc = rand_constant(&mut rng, Shape::new(1, 4, 3, 3), 0.3, 3.7);
    let mix = rand_constant(&mut rng, Shape::new(1, 4, 3, 3), -1.0, 1.0);
    let mi = mix.clone();
    check(&mut reports, "tmp", &feat, move |t| {
        weighted_sum(&bilinear_sample(t, &ptsc)?, &mi)
    })?;
    check(&mut reports, "tmp", &pts, move |t| {
        weighted_sum(&bilinear_sample(&featc, t)?, &mix)
    })?;
    merge_worst(&mut reports, 2, "bilinear_sample");

    // deformable convolution with non-trivial offsets, so the bilinear
    // taps land between pixels rather than on the regular grid
    let module: DeformConvModule<f64> = DeformConvModule::new(&mut rng, 3, 4, 3)?;
    let mut offs = ChaCha8Rng::seed_from_u64(18);
    module
        .offset_weight
        .with_data_mut(|d| d.iter_mut().for_each(|v| *v = offs.gen_range(-0.05..0.05)));
    module
        .offset_bias
        .with_data_mut(|d| d.iter_mut().for_each(|v| *v = offs.gen_range(-0.3..0.3)));
    let x = rand_tensor(&mut rng, Shape::new(2, 3, 6, 6), -1.0, 1.0);
    let mix = rand_constant(&mut rng, Shape::new(2, 4, 6, 6), -1.0, 1.0);
    check(&mut reports, "deform_conv", &x, move |t| {
        weighted_sum(&module.forward(t)?, &mix)
    })?;

    // batch normalization in training mode (batch statistics path)
    let bn: BatchNorm2d<f64> = BatchNorm2d::new(3);
    bn.gamma.with_data_mut(|d| d.iter_mut().enumerate().for_each(|(i, v)| *v = 0.8 + 0.2 * i as f64));
    bn.beta.with_data_mut(|d| d.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * i as f64));
    let x = rand_tensor(&mut rng, Shape::new(4, 3, 5, 5), -1.0, 1.0);
    let mix = rand_constant(&mut rng, Shape::new(4, 3, 5, 5), -1.0, 1.0);
    check(&mut reports, "batch_norm", &x, move |t| {
        weighted_sum(&bn.forward(t, true)?, &mix)
    })?;

    // activations
    let x = rand_tensor(&mut rng, Shape::new(1, 3, 4, 4), -2.0, 2.0);
    let mix = rand_constant(&mut rng, Shape::new(1, 3, 4, 4), -1.0, 1.0);
    check(&mut reports, "silu", &x, move |t| weighted_sum(&t.silu(), &mix))?;
    let x = rand_tensor(&mut rng, Shape::new(1, 3, 4, 4), -2.0, 2.0);
    let mix = rand_constant(&mut rng, Shape::new(1, 3, 4, 4), -1.0, 1.0);
    check(&mut reports, "sigmoid", &x, move |t| weighted_sum(&t.sigmoid(), &mix))?;

    // fully connected product, checked against input and weight
    let x = rand_tensor(&mut rng, Shape::new(3, 5, 1, 1), -1.0, 1.0);
    let w = rand_tensor(&mut rng, Shape::new(4, 5, 1, 1), -1.0, 1.0);
    let xc = rand_constant(&mut rng, Shape::new(3, 5, 1, 1), -1.0, 1.0);
    let wc = rand_constant(&mut rng, Shape::new(4, 5, 1, 1), -1.0, 1.0);
    let b = rand_constant(&mut rng, Shape::new(1, 4, 1, 1), -0.2, 0.2);
    let mix = rand_constant(&mut rng, Shape::new(3, 4, 1, 1), -1.0, 1.0);
    let (bi, mi) = (b.clone(), mix.clone());
    check(&mut reports, "tmp", &x, move |t| weighted_sum(&matmul(t, &wc, Some(&bi))?, &mi))?;
    check(&mut reports, "tmp", &w, move |t| weighted_sum(&matmul(&xc, t, Some(&b))?, &mix))?;
    merge_worst(&mut reports, 2, "matmul");

    // box regression loss on a batch of box pairs; the checked tensor
    // packs [cx.., cy.., w.., h..] and is split back out with gather
    let l = 6usize;
    let mut data = Vec::with_capacity(4 * l);
    for _ in 0..2 * l {
        data.push(rng.gen_range(0.3..0.7)); // centers
    }
    for _ in 0..2 * l {
        data.push(rng.gen_range(0.2..0.5)); // sides
    }
    let t = Tensor::leaf(Shape::new(1, 1, 1, 4 * l), data)?;
    let mut tdata = Vec::with_capacity(4 * l);
    for _ in 0..2 * l {
        tdata.push(rng.gen_range(0.3..0.7));
    }
    for _ in 0..2 * l {
        tdata.push(rng.gen_range(0.2..0.5));
    }
    let tgt = Tensor::constant(Shape::new(1, 1, 1, 4 * l), tdata)?;
    let idx = |from: usize| -> Vec<usize> { (from * l..(from + 1) * l).collect() };
    check(&mut reports, "eiou_loss", &t, move |t| {
        let (pcx, pcy, pw, ph) =
            (t.gather(&idx(0))?, t.gather(&idx(1))?, t.gather(&idx(2))?, t.gather(&idx(3))?);
        let (tcx, tcy, tw, th) = (
            tgt.gather(&idx(0))?,
            tgt.gather(&idx(1))?,
            tgt.gather(&idx(2))?,
            tgt.gather(&idx(3))?,
        );
        Ok(eiou_loss_components(&pcx, &pcy, &pw, &ph, &tcx, &tcy, &tw, &th)?.sum())
    })?;

    // objectness cross-entropy on sigmoid logits against hard 0/1 targets
    let t = rand_tensor(&mut rng, Shape::new(1, 1, 1, 12), -2.0, 2.0);
    let tgt = Tensor::constant(
        Shape::new(1, 1, 1, 12),
        (0..12).map(|i| (i % 3 == 0) as usize as f64).collect(),
    )?;
    check(&mut reports, "confidence_loss", &t, move |t| confidence_loss(&t.sigmoid(), &tgt))?;

    // per-class cross-entropy on sigmoid logits against one-hot rows
    let (s, k) = (3usize, 4usize);
    let t = rand_tensor(&mut rng, Shape::new(1, 1, 1, s * k), -2.0, 2.0);
    let mut hot = vec![0.0; s * k];
    for i in 0..s {
        hot[i * k + i % k] = 1.0;
    }
    let tgt = Tensor::constant(Shape::new(1, 1, 1, s * k), hot)?;
    check(&mut reports, "classification_loss", &t, move |t| {
        classification_loss(&t.sigmoid(), &tgt)
    })?;

    // symmetric stop-gradient loss, checked against the predictor output
    // of one branch; the other three inputs are held constant
    let pa = rand_tensor(&mut rng, Shape::new(2, 8, 1, 1), -1.0, 1.0);
    let pb = rand_constant(&mut rng, Shape::new(2, 8, 1, 1), -1.0, 1.0);
    let za = rand_constant(&mut rng, Shape::new(2, 8, 1, 1), -1.0, 1.0);
    let zb = rand_constant(&mut rng, Shape::new(2, 8, 1, 1), -1.0, 1.0);
    check(&mut reports, "siamese_loss", &pa, move |t| simsiam_loss(t, &pb, &za, &zb))?;

    Ok(reports)
}

/// Sanity fixture with a deliberately wrong gradient: the analytic
/// gradient of sum(sg(t) * t) is t, while the true derivative is 2t.
/// The harness must report a large error here, or it proves nothing.
pub fn negative_control() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let t = rand_tensor(&mut rng, Shape::new(1, 1, 1, 8), 0.5, 1.5);
    finite_diff_check(|t| Ok(t.stop_gradient().mul(t)?.sum()), &t, STEP, MAX_COORDS)
}
