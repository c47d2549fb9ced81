use bordism::emspaces::{Combination, ProductSpace};
use bordism::fplin::{FpMatrix, FpVector, Prime, Subspace};
use bordism::steenrod::{
    adem_normalize, algebra_basis, in_subalgebra, AlgebraTable, Generator, SteenrodElement, Subalgebra,
};
use proptest::prelude::*;

fn prime_strategy() -> impl Strategy<Value = Prime> {
    prop_oneof![Just(Prime::Two), Just(Prime::Three)]
}

fn matrix(p: Prime) -> impl Strategy<Value = FpMatrix> {
    let q = p.value() as i64;
    (1usize..7, 1usize..7).prop_flat_map(move |(r, c)| {
        proptest::collection::vec(proptest::collection::vec(0..q, c), r)
            .prop_map(move |rows| FpMatrix::from_rows(p, &rows).unwrap())
    })
}

fn word(p: Prime, max_len: usize) -> BoxedStrategy<Vec<Generator>> {
    match p {
        Prime::Two => proptest::collection::vec((1u32..9).prop_map(Generator::Sq), 0..max_len).boxed(),
        Prime::Three => proptest::collection::vec(
            prop_oneof![Just(Generator::Beta), (1u32..4).prop_map(Generator::P)],
            0..max_len,
        )
        .boxed(),
    }
}

fn prime_and_words(n: usize) -> impl Strategy<Value = (Prime, Vec<Vec<Generator>>)> {
    prime_strategy().prop_flat_map(move |p| (Just(p), proptest::collection::vec(word(p, 4), n)))
}

fn normal(p: Prime, w: &[Generator]) -> SteenrodElement {
    adem_normalize(p, w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rank_equals_transpose_rank(m in prime_strategy().prop_flat_map(matrix)) {
        prop_assert_eq!(m.rank(), m.transpose().rank());
    }

    #[test]
    fn kernels_have_complementary_dimension(m in prime_strategy().prop_flat_map(matrix)) {
        let right = m.kernel_basis();
        prop_assert_eq!(right.len() + m.rank(), m.num_cols());
        for v in &right {
            prop_assert!(m.mul_vec(v).unwrap().is_zero());
        }
        let left = m.left_kernel();
        prop_assert_eq!(left.len() + m.rank(), m.num_rows());
        for v in &left {
            prop_assert!(m.row_combination(v).is_zero());
        }
    }

    #[test]
    fn subspace_membership_matches_rank(m in prime_strategy().prop_flat_map(matrix), extra in 0usize..6) {
        let p = m.prime();
        let mut s = Subspace::new(p, m.num_cols());
        for r in m.rows() {
            s.insert(r);
        }
        prop_assert_eq!(s.dim(), m.rank());
        let v = FpVector::unit(p, m.num_cols(), extra % m.num_cols());
        let mut rows = m.rows().to_vec();
        rows.push(v.clone());
        let grown = FpMatrix::from_vectors(p, m.num_cols(), rows).rank();
        prop_assert_eq!(s.contains(&v), grown == m.rank());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn adem_normal_form_is_idempotent((p, ws) in prime_and_words(1)) {
        let x = normal(p, &ws[0]);
        for (m, c) in x.terms() {
            prop_assert!(m.is_admissible());
            let again = normal(p, &m.letters());
            let mut expect = SteenrodElement::zero(p, m.degree());
            expect.add_term(m.clone(), 1);
            prop_assert_eq!(again, expect);
            prop_assert!(c != 0);
        }
    }

    #[test]
    fn adem_product_is_associative((p, ws) in prime_and_words(3)) {
        let (a, b, c) = (normal(p, &ws[0]), normal(p, &ws[1]), normal(p, &ws[2]));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        // Concatenation of words is the product of their normal forms.
        let joined: Vec<Generator> = ws[0].iter().chain(&ws[1]).copied().collect();
        prop_assert_eq!(normal(p, &joined), a.mul(&b));
    }
}

#[test]
fn a1_and_a2_dimensions() {
    let a1 = AlgebraTable::get(Prime::Two, Subalgebra::A1, 6).unwrap();
    assert_eq!(a1.total_dim(), 8);
    assert_eq!(a1.dim(6), 1);
    let a2 = AlgebraTable::get(Prime::Two, Subalgebra::A2, 23).unwrap();
    assert_eq!(a2.total_dim(), 64);
}

#[test]
fn subalgebras_are_nested() {
    for d in 0..=6 {
        for x in algebra_basis(Prime::Two, Subalgebra::A1, d).unwrap() {
            assert!(in_subalgebra(&x, Subalgebra::A2).unwrap());
        }
    }
    for d in 0..=12 {
        let full = algebra_basis(Prime::Two, Subalgebra::Full, d).unwrap().len();
        let a2 = algebra_basis(Prime::Two, Subalgebra::A2, d).unwrap().len();
        let a1 = algebra_basis(Prime::Two, Subalgebra::A1, d).unwrap().len();
        assert!(a1 <= a2 && a2 <= full, "degree {d}");
    }
}

fn sq_word(space: &ProductSpace, w: &[u32], c: &Combination) -> Combination {
    w.iter().rev().fold(c.clone(), |acc, &k| space.sq_comb(k, &acc))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Acting by a word agrees with acting by its Adem normal form.
    #[test]
    fn unstable_action_respects_adem(i in 0usize..40, w in proptest::collection::vec(1u32..6, 1..3)) {
        let space = ProductSpace::kz5_cp2();
        let basis: Vec<_> = space.product_basis(12).into_iter().flatten().collect();
        let c = basis[i % basis.len()].clone();
        let single: Combination = [c.clone()].into_iter().collect();
        let by_word = sq_word(&space, &w, &single);
        let letters: Vec<Generator> = w.iter().map(|&k| Generator::Sq(k)).collect();
        let by_normal = space.act(&normal(Prime::Two, &letters), &c).unwrap();
        prop_assert_eq!(by_word, by_normal);
    }

    /// Cartan formula on products of basis classes.
    #[test]
    fn unstable_action_is_cartan(i in 0usize..40, j in 0usize..40, k in 1u32..6) {
        let space = ProductSpace::kz5_cp2();
        let basis: Vec<_> = space.product_basis(8).into_iter().flatten().collect();
        let a: Combination = [basis[i % basis.len()].clone()].into_iter().collect();
        let b: Combination = [basis[j % basis.len()].clone()].into_iter().collect();
        let lhs = space.sq_comb(k, &space.mul_comb(&a, &b));
        let mut rhs = Combination::new();
        for l in 0..=k {
            for term in space.mul_comb(&space.sq_comb(l, &a), &space.sq_comb(k - l, &b)) {
                if !rhs.remove(&term) {
                    rhs.insert(term);
                }
            }
        }
        prop_assert_eq!(lhs, rhs);
    }
}
