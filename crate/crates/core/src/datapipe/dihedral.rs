//! The eight dihedral transforms of a square patch (rotations and flips).

/// Number of distinct transforms in the group.
pub const COUNT: u8 = 8;

/// Apply transform `k` (0..8) to a `side`×`side` patch.
///
/// 0 identity, 1 rot90, 2 rot180, 3 rot270 (clockwise), 4 horizontal flip,
/// 5 vertical flip, 6 transpose, 7 anti-transpose.
pub fn apply<T: Copy>(src: &[T], side: usize, k: u8) -> Vec<T> {
    assert_eq!(src.len(), side * side, "dihedral transforms need a square");
    assert!(k < COUNT, "transform index {k} out of range");
    let m = side - 1;
    let mut out = Vec::with_capacity(src.len());
    for y in 0..side {
        for x in 0..side {
            let (sy, sx) = match k {
                0 => (y, x),
                1 => (m - x, y),
                2 => (m - y, m - x),
                3 => (x, m - y),
                4 => (y, m - x),
                5 => (m - y, x),
                6 => (x, y),
                _ => (m - x, m - y),
            };
            out.push(src[sy * side + sx]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(side: usize) -> Vec<u32> {
        (0..side * side).map(|i| i as u32).collect()
    }

    #[test]
    fn all_eight_distinct_on_asymmetric_patch() {
        let p = patch(4);
        let outs: Vec<Vec<u32>> = (0..COUNT).map(|k| apply(&p, 4, k)).collect();
        for i in 0..outs.len() {
            for j in i + 1..outs.len() {
                assert_ne!(outs[i], outs[j], "transforms {i} and {j} coincide");
            }
        }
    }

    #[test]
    fn rotations_compose_to_identity() {
        let p = patch(5);
        let mut q = p.clone();
        for _ in 0..4 {
            q = apply(&q, 5, 1);
        }
        assert_eq!(p, q);
        // rot90 twice is rot180.
        assert_eq!(apply(&apply(&p, 5, 1), 5, 1), apply(&p, 5, 2));
    }

    #[test]
    fn flips_are_involutions() {
        let p = patch(6);
        for k in [4u8, 5, 6, 7, 2] {
            assert_eq!(apply(&apply(&p, 6, k), 6, k), p, "transform {k}");
        }
    }

    #[test]
    fn known_rot90_of_2x2() {
        // [0 1; 2 3] rotated clockwise becomes [2 0; 3 1].
        assert_eq!(apply(&[0, 1, 2, 3], 2, 1), vec![2, 0, 3, 1]);
    }
}
