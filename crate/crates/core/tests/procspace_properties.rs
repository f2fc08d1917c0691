use proptest::prelude::*;

use procmap_core::{MachineShape, ProcSpace, Transform, Tuple};

/// Forward image of a base-side index through one transform, written
/// independently of the library's inverse walk.
fn forward(t: Transform, input: &[i64], a: &[i64]) -> Option<Vec<i64>> {
    let mut b = a.to_vec();
    match t {
        Transform::Split { dim, factor } => {
            b[dim] = a[dim] % factor;
            b.insert(dim + 1, a[dim] / factor);
        }
        Transform::Merge { p, q } => {
            b[p] = a[p] + a[q] * input[p];
            b.remove(q);
        }
        Transform::Swap { p, q } => b.swap(p, q),
        Transform::Slice { dim, low, high } => {
            if a[dim] < low || a[dim] > high {
                return None;
            }
            b[dim] = a[dim] - low;
        }
    }
    Some(b)
}

fn forward_chain(space: &ProcSpace, base_idx: &[i64]) -> Option<Vec<i64>> {
    let mut shapes = vec![space.base().shape().to_vec()];
    let mut s = ProcSpace::machine(space.base());
    for &t in space.chain() {
        s = s.apply(t).unwrap();
        shapes.push(s.shape().to_vec());
    }
    let mut a = base_idx.to_vec();
    for (t, input) in space.chain().iter().zip(&shapes) {
        a = forward(*t, input, &a)?;
    }
    Some(a)
}

fn divisors(n: i64) -> Vec<i64> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Applies up to `steps` random valid transforms, driven by `picks`.
fn random_chain(machine: MachineShape, picks: &[u32], allow_slice: bool) -> ProcSpace {
    let mut s = ProcSpace::machine(machine);
    for &r in picks {
        let shape = s.shape().to_vec();
        let rank = shape.len();
        let dim = (r as usize / 7) % rank;
        let next = match r % if allow_slice { 4 } else { 3 } {
            0 => {
                let ds = divisors(shape[dim]);
                s.split(dim, ds[(r as usize / 3) % ds.len()])
            }
            1 if rank >= 2 => {
                let q = dim.max(1);
                let p = (r as usize / 11) % q;
                s.merge(p, q)
            }
            2 if rank >= 2 => s.swap(dim, (dim + 1 + r as usize / 13) % rank),
            3 => {
                let e = shape[dim];
                let low = (r as i64 / 5) % e;
                let high = low + (r as i64 / 17) % (e - low);
                s.slice(dim, low, high)
            }
            _ => continue,
        };
        s = next.expect("generated transforms are valid");
    }
    s
}

fn machine() -> impl Strategy<Value = MachineShape> {
    (1u32..=8, 1u32..=8).prop_map(|(n, p)| MachineShape::gpu(n, p))
}

proptest! {
    #[test]
    fn resolution_inverts_the_forward_map(m in machine(), picks in prop::collection::vec(any::<u32>(), 0..8)) {
        let s = random_chain(m, &picks, true);
        for idx in Tuple::points_of(s.shape()) {
            let base = s.resolve_to_base(&idx).unwrap();
            prop_assert!(base.in_bounds(&m.shape()));
            prop_assert_eq!(forward_chain(&s, base.as_slice()), Some(idx.to_vec()));
        }
    }

    #[test]
    fn slice_free_chains_are_bijective(m in machine(), picks in prop::collection::vec(any::<u32>(), 0..8)) {
        let s = random_chain(m, &picks, false);
        prop_assert_eq!(s.volume(), m.processor_count() as i64);
        let mut seen: Vec<_> = s.materialize().unwrap().into_iter().map(|(_, p)| p).collect();
        seen.sort();
        seen.dedup();
        prop_assert_eq!(seen.len() as u64, m.processor_count());
    }

    #[test]
    fn merge_undoes_split(m in machine(), picks in prop::collection::vec(any::<u32>(), 0..5), r in any::<u32>()) {
        let s = random_chain(m, &picks, true);
        let dim = r as usize % s.rank();
        let ds = divisors(s.shape()[dim]);
        let back = s.split(dim, ds[r as usize % ds.len()]).unwrap().merge(dim, dim + 1).unwrap();
        prop_assert_eq!(back.shape(), s.shape());
        prop_assert_eq!(back.materialize().unwrap(), s.materialize().unwrap());
    }

    #[test]
    fn swap_is_an_involution(m in machine(), picks in prop::collection::vec(any::<u32>(), 0..5), p in 0usize..4, q in 0usize..4) {
        let s = random_chain(m, &picks, true);
        let (p, q) = (p % s.rank(), q % s.rank());
        let back = s.swap(p, q).unwrap().swap(p, q).unwrap();
        prop_assert_eq!(back.shape(), s.shape());
        prop_assert_eq!(back.materialize().unwrap(), s.materialize().unwrap());
    }

    #[test]
    fn decompose_is_the_split_sequence(n in 1u32..=4, p in 1u32..=64, r in any::<u64>()) {
        let m = MachineShape::gpu(n, p);
        let s = ProcSpace::machine(m);
        // A random ordered factorization of p into up to three factors.
        let ds = divisors(p as i64);
        let f0 = ds[(r % ds.len() as u64) as usize];
        let rest = divisors(p as i64 / f0);
        let f1 = rest[((r >> 16) % rest.len() as u64) as usize];
        let factors = [f0, f1, p as i64 / f0 / f1];
        let d = s.desugar_decompose(1, &factors).unwrap();
        prop_assert_eq!(d.shape().as_slice(), &[n as i64, f0, f1, factors[2]][..]);
        // Little-endian digits: the first factor is the fastest-varying.
        for idx in Tuple::points_of(d.shape()) {
            let proc = idx[1] + idx[2] * f0 + idx[3] * f0 * f1;
            prop_assert_eq!(d.resolve(&idx).unwrap(), procmap_core::ProcessorRef::new(idx[0] as u32, proc as u32));
        }
    }
}
