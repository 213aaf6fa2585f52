use proptest::prelude::*;
use warpcone::fibred::Cocycle;
use warpcone::group::{Group, Letter, QuotientTower};
use warpcone::scalar::Rational;
use warpcone::space::build_profinite_model;
use warpcone::warp::{check_axioms, warped_chain, warped_closed_form};

fn word(max: usize, letters: Letter) -> impl Strategy<Value = Vec<Letter>> {
    prop::collection::vec(0..letters, 0..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_cocycle_law_on_random_words(a in word(8, 4), b in word(8, 4)) {
        let group = Group::free(2).unwrap();
        let c = Cocycle::for_group(&group).unwrap();
        let (g, h) = (group.reduce_letters(&a), group.reduce_letters(&b));
        let lhs = c.value(&group.mul(&g, &h));
        let rhs = c.act(&g, &c.value(&h)).plus(&c.value(&g));
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(c.value(&g).norm_sq(), g.len() as i64);
    }

    #[test]
    fn shift_cocycle_law_on_random_words(a in word(8, 4), b in word(8, 4)) {
        let group = Group::free_abelian(2).unwrap();
        let c = Cocycle::for_group(&group).unwrap();
        let (g, h) = (group.reduce_letters(&a), group.reduce_letters(&b));
        let lhs = c.value(&group.mul(&g, &h));
        let rhs = c.act(&g, &c.value(&h)).plus(&c.value(&g));
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(c.value(&g).norm_sq(), g.len() as i64);
    }

    #[test]
    fn engines_agree_on_random_levels(depth in 1usize..=4, p in 1i128..=200, q in 1i128..=4) {
        prop_assume!(p >= q);
        let tower = QuotientTower::dyadic(1, depth).unwrap();
        let model = build_profinite_model(&tower, depth, Rational::new(p, q), 64).unwrap();
        let chain = warped_chain(&model).unwrap();
        let closed = warped_closed_form(&model).unwrap();
        prop_assert!(chain.agrees_with(&closed));
        prop_assert!(check_axioms(&model, &chain).passed());
    }
}
