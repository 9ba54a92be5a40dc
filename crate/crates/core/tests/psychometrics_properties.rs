use proptest::prelude::*;
use riskscale::psychometrics::{chi_squared, cronbach_alpha_columns, item_discrimination, two_sample_t, ContingencyTable, ResponseMatrix};
use riskscale::{Exact, Label, Scalar};

fn columns() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (2usize..6, 3usize..12).prop_flat_map(|(k, n)| prop::collection::vec(prop::collection::vec(0i64..4, n), k))
}

fn exact(col: &[i64]) -> Vec<Exact> {
    col.iter().map(|&x| Exact::from_integer(x.into())).collect()
}

fn matrices() -> impl Strategy<Value = ResponseMatrix> {
    (2usize..8, 4usize..20).prop_flat_map(|(k, n)| {
        (prop::collection::vec(prop::collection::vec(0u8..2, k), n), prop::collection::vec(any::<bool>(), n))
            .prop_filter("both labels", |(_, l)| l.iter().any(|b| *b) && l.iter().any(|b| !*b))
            .prop_map(|(rows, labels)| {
                let labels = labels.into_iter().map(|b| if b { Label::Severe } else { Label::NonSevere }).collect();
                ResponseMatrix::new(rows, labels).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn alpha_ignores_item_shifts(cols in columns(), item in 0usize..6, shift in -5i64..5) {
        let base: Vec<Vec<Exact>> = cols.iter().map(|c| exact(c)).collect();
        let Ok(alpha) = cronbach_alpha_columns(&base) else { return Ok(()) };
        let mut shifted = cols.clone();
        let j = item % cols.len();
        shifted[j].iter_mut().for_each(|x| *x += shift);
        let shifted: Vec<Vec<Exact>> = shifted.iter().map(|c| exact(c)).collect();
        prop_assert_eq!(cronbach_alpha_columns(&shifted).unwrap(), alpha);
    }

    #[test]
    fn chi_squared_is_non_negative(a in prop::collection::vec(1u64..30, 2..6), b in prop::collection::vec(1u64..30, 2..6)) {
        let k = a.len().min(b.len());
        let table = ContingencyTable::new(a[..k].to_vec(), b[..k].to_vec()).unwrap();
        prop_assert!(chi_squared::<Exact>(&table).unwrap().statistic >= Exact::from_count(0));
    }

    #[test]
    fn chi_squared_zero_iff_proportional(row in prop::collection::vec(1u64..20, 2..6), scale in 1u64..5) {
        let table = ContingencyTable::new(row.clone(), row.iter().map(|x| x * scale).collect()).unwrap();
        prop_assert_eq!(chi_squared::<Exact>(&table).unwrap().statistic, Exact::from_count(0));
        let mut bumped: Vec<u64> = row.iter().map(|x| x * scale).collect();
        bumped[0] += 1;
        let table = ContingencyTable::new(row, bumped).unwrap();
        prop_assert!(chi_squared::<Exact>(&table).unwrap().statistic > Exact::from_count(0));
    }

    #[test]
    fn t_is_antisymmetric(a in prop::collection::vec(0i64..10, 2..10), b in prop::collection::vec(0i64..10, 2..10)) {
        let (a, b) = (exact(&a), exact(&b));
        match (two_sample_t(&a, &b), two_sample_t(&b, &a)) {
            (Ok(ab), Ok(ba)) => {
                prop_assert_eq!(ab.statistic.to_f64_lossy(), -ba.statistic.to_f64_lossy());
                prop_assert_eq!(ab.significant_at_05, ba.significant_at_05);
            }
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            _ => prop_assert!(false, "only one direction failed"),
        }
    }

    #[test]
    fn ranking_follows_item_permutation(matrix in matrices(), seed in any::<u64>()) {
        let k = matrix.item_count();
        // A deterministic shuffle of the item order.
        let mut order: Vec<usize> = (0..k).collect();
        let mut s = seed;
        for i in (1..k).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let original = item_discrimination::<Exact>(&matrix).unwrap();
        let permuted = item_discrimination::<Exact>(&matrix.permute_items(&order)).unwrap();
        // New item j+1 is old item order[j] + 1.
        let stat_of = |ranked: &[riskscale::psychometrics::ItemDiscrimination<Exact>], id: u8| {
            ranked.iter().find(|d| d.item_id == id).unwrap().report.statistic.clone()
        };
        for (j, &old) in order.iter().enumerate() {
            prop_assert_eq!(stat_of(&permuted, j as u8 + 1), stat_of(&original, old as u8 + 1));
        }
        let stats = |r: &[riskscale::psychometrics::ItemDiscrimination<Exact>]| r.iter().map(|d| d.report.statistic.clone()).collect::<Vec<_>>();
        prop_assert_eq!(stats(&permuted), stats(&original));
    }
}

#[test]
fn identical_columns_have_unit_alpha() {
    let col = exact(&[0, 1, 1, 2, 3, 0]);
    assert_eq!(cronbach_alpha_columns(&vec![col; 4]).unwrap(), Exact::from_count(1));
}
