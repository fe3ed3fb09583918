use super::RgbaImage;

/// Source-over blend of `above` onto `below`, with `above`'s top-left corner
/// at `offset` in `below`'s coordinates. Pixels outside `below` are clipped.
///
/// Straight alpha, computed in `f64` and rounded half away from zero:
///
/// ```text
/// a_f = A_above / 255, a_b = A_below / 255
/// out_a = a_f + a_b * (1 - a_f)
/// out_c = (c_f * a_f + c_b * a_b * (1 - a_f)) / out_a
/// A_out = round(out_a * 255)
/// ```
///
/// A source pixel with alpha 0 leaves the destination untouched and a source
/// pixel with alpha 255 replaces it; both agree with the formula whenever
/// `out_a > 0`.
pub fn composite_over(below: &RgbaImage, above: &RgbaImage, offset: (i32, i32)) -> RgbaImage {
    let mut out = below.clone();
    composite_over_in_place(&mut out, above, offset);
    out
}

pub fn composite_over_in_place(dst: &mut RgbaImage, above: &RgbaImage, offset: (i32, i32)) {
    let (ox, oy) = (offset.0 as i64, offset.1 as i64);
    let x_start = ox.max(0);
    let y_start = oy.max(0);
    let x_end = (ox + above.width as i64).min(dst.width as i64);
    let y_end = (oy + above.height as i64).min(dst.height as i64);
    if x_start >= x_end || y_start >= y_end {
        return;
    }
    for y in y_start..y_end {
        let sy = (y - oy) as u32;
        for x in x_start..x_end {
            let sx = (x - ox) as u32;
            let so = above.offset(sx, sy);
            let d = dst.offset(x as u32, y as u32);
            let src: [u8; 4] = above.data[so..so + 4].try_into().unwrap();
            blend_pixel(&mut dst.data[d..d + 4], src);
        }
    }
}

#[inline]
fn blend_pixel(dst: &mut [u8], src: [u8; 4]) {
    match src[3] {
        0 => {}
        255 => dst.copy_from_slice(&src),
        sa => {
            let af = sa as f64 / 255.0;
            let ab = dst[3] as f64 / 255.0;
            let out_a = af + ab * (1.0 - af);
            for c in 0..3 {
                let v = (src[c] as f64 * af + dst[c] as f64 * ab * (1.0 - af)) / out_a;
                dst[c] = v.round().clamp(0.0, 255.0) as u8;
            }
            dst[3] = (out_a * 255.0).round().clamp(0.0, 255.0) as u8;
        }
    }
}

/// Folds `layers` bottom-to-top onto a copy of `background`.
pub fn flatten<'a>(
    background: &RgbaImage,
    layers: impl IntoIterator<Item = (&'a RgbaImage, (i32, i32))>,
) -> RgbaImage {
    let mut out = background.clone();
    for (img, offset) in layers {
        composite_over_in_place(&mut out, img, offset);
    }
    out
}
