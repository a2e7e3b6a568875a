use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

/// Bilinear sampling of `feature` (N,C,H,W) at fractional coordinates.
///
/// `points` is (N, 2·P, H_out, W_out): channel 2p holds the y coordinate of
/// sampling point p, channel 2p+1 its x coordinate, in feature pixel units.
/// The output is (N, C·P, H_out, W_out) with channel index c·P + p.
/// Out-of-bounds neighbors contribute zero; gradients flow to both the
/// feature values and the coordinates.
pub fn bilinear_sample<T: Scalar>(feature: &Tensor<T>, points: &Tensor<T>) -> Result<Tensor<T>> {
    let fs = feature.shape();
    let ps = points.shape();
    if ps.n != fs.n || ps.c % 2 != 0 {
        return Err(Error::ShapeMismatch { op: "bilinear_sample", lhs: fs, rhs: ps });
    }
    let p_count = ps.c / 2;
    let out_shape = Shape::new(fs.n, fs.c * p_count, ps.h, ps.w);

    let mut out = vec![T::zero(); out_shape.numel()];
    {
        let f = feature.data();
        let pts = points.data();
        for n in 0..fs.n {
            for p in 0..p_count {
                for oh in 0..ps.h {
                    for ow in 0..ps.w {
                        let y = pts[ps.idx(n, 2 * p, oh, ow)].to_f64();
                        let x = pts[ps.idx(n, 2 * p + 1, oh, ow)].to_f64();
                        let (y0, x0) = (y.floor(), x.floor());
                        let (dy, dx) = (y - y0, x - x0);
                        let (y0, x0) = (y0 as isize, x0 as isize);
                        for c in 0..fs.c {
                            let at = |iy: isize, ix: isize| -> f64 {
                                if iy < 0 || ix < 0 || iy >= fs.h as isize || ix >= fs.w as isize {
                                    0.0
                                } else {
                                    f[fs.idx(n, c, iy as usize, ix as usize)].to_f64()
                                }
                            };
                            let v = at(y0, x0) * (1.0 - dy) * (1.0 - dx)
                                + at(y0, x0 + 1) * (1.0 - dy) * dx
                                + at(y0 + 1, x0) * dy * (1.0 - dx)
                                + at(y0 + 1, x0 + 1) * dy * dx;
                            out[out_shape.idx(n, c * p_count + p, oh, ow)] = T::from_f64(v);
                        }
                    }
                }
            }
        }
    }

    let ft = feature.clone();
    let pt = points.clone();
    Ok(Tensor::from_op(
        out_shape,
        out,
        vec![feature.clone(), points.clone()],
        Box::new(move |gout| {
            let f = ft.data();
            let pts = pt.data();
            let mut gf = vec![T::zero(); fs.numel()];
            let mut gp = vec![T::zero(); ps.numel()];
            for n in 0..fs.n {
                for p in 0..p_count {
                    for oh in 0..ps.h {
                        for ow in 0..ps.w {
                            let y = pts[ps.idx(n, 2 * p, oh, ow)].to_f64();
                            let x = pts[ps.idx(n, 2 * p + 1, oh, ow)].to_f64();
                            let (fy0, fx0) = (y.floor(), x.floor());
                            let (dy, dx) = (y - fy0, x - fx0);
                            let (y0, x0) = (fy0 as isize, fx0 as isize);
                            let mut gy_total = 0.0;
                            let mut gx_total = 0.0;
                            for c in 0..fs.c {
                                let g = gout[out_shape.idx(n, c * p_count + p, oh, ow)].to_f64();
                                if g == 0.0 {
                                    continue;
                                }
                                let mut corner = |iy: isize, ix: isize, w: f64, wy: f64, wx: f64| {
                                    if iy < 0 || ix < 0 || iy >= fs.h as isize || ix >= fs.w as isize {
                                        return;
                                    }
                                    let idx = fs.idx(n, c, iy as usize, ix as usize);
                                    gf[idx] = gf[idx] + T::from_f64(g * w);
                                    let v = f[idx].to_f64();
                                    gy_total += g * v * wy;
                                    gx_total += g * v * wx;
                                };
                                corner(y0, x0, (1.0 - dy) * (1.0 - dx), -(1.0 - dx), -(1.0 - dy));
                                corner(y0, x0 + 1, (1.0 - dy) * dx, -dx, 1.0 - dy);
                                corner(y0 + 1, x0, dy * (1.0 - dx), 1.0 - dx, -dy);
                                corner(y0 + 1, x0 + 1, dy * dx, dx, dy);
                            }
                            let gpy = ps.idx(n, 2 * p, oh, ow);
                            let gpx = ps.idx(n, 2 * p + 1, oh, ow);
                            gp[gpy] = gp[gpy] + T::from_f64(gy_total);
                            gp[gpx] = gp[gpx] + T::from_f64(gx_total);
                        }
                    }
                }
            }
            drop(f);
            drop(pts);
            ft.accumulate_grad(&gf);
            pt.accumulate_grad(&gp);
        }),
    ))
}
