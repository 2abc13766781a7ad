//! Coefficients of the Dormand–Prince 8(5,3) pair (Hairer, Nørsett & Wanner,
//! `DOP853`). Stage 12 sits at `t + h`; the 8th-order solution uses the
//! weights `B`, the 5th- and 3rd-order error estimators `ER` and `BHH`.

#![allow(clippy::excessive_precision)]

pub(super) const STAGES: usize = 12;

/// Stage nodes; the field is autonomous so they only enter the checks below.
#[cfg_attr(not(test), allow(dead_code))]
pub(super) const C: [f64; STAGES] = [
    0.0,
    0.526001519587677318785587544488E-01,
    0.789002279381515978178381316732E-01,
    0.118350341907227396726757197510E+00,
    0.281649658092772603273242802490E+00,
    0.333333333333333333333333333333E+00,
    0.25E+00,
    0.307692307692307692307692307692E+00,
    0.651282051282051282051282051282E+00,
    0.6E+00,
    0.857142857142857142857142857142E+00,
    1.0,
];

/// Nonzero entries `(j, a_ij)` of row `i` of the Runge–Kutta matrix.
pub(super) const A: [&[(usize, f64)]; STAGES] = [
    &[],
    &[(0, 5.26001519587677318785587544488E-2)],
    &[
        (0, 1.97250569845378994544595329183E-2),
        (1, 5.91751709536136983633785987549E-2),
    ],
    &[
        (0, 2.95875854768068491816892993775E-2),
        (2, 8.87627564304205475450678981324E-2),
    ],
    &[
        (0, 2.41365134159266685502369798665E-1),
        (2, -8.84549479328286085344864962717E-1),
        (3, 9.24834003261792003115737966543E-1),
    ],
    &[
        (0, 3.7037037037037037037037037037E-2),
        (3, 1.70828608729473871279604482173E-1),
        (4, 1.25467687566822425016691814123E-1),
    ],
    &[
        (0, 3.7109375E-2),
        (3, 1.70252211019544039314978060272E-1),
        (4, 6.02165389804559606850219397283E-2),
        (5, -1.7578125E-2),
    ],
    &[
        (0, 3.70920001185047927108779319836E-2),
        (3, 1.70383925712239993810214054705E-1),
        (4, 1.07262030446373284651809199168E-1),
        (5, -1.53194377486244017527936158236E-2),
        (6, 8.27378916381402288758473766002E-3),
    ],
    &[
        (0, 6.24110958716075717114429577812E-1),
        (3, -3.36089262944694129406857109825E0),
        (4, -8.68219346841726006818189891453E-1),
        (5, 2.75920996994467083049415600797E1),
        (6, 2.01540675504778934086186788979E1),
        (7, -4.34898841810699588477366255144E1),
    ],
    &[
        (0, 4.77662536438264365890433908527E-1),
        (3, -2.48811461997166764192642586468E0),
        (4, -5.90290826836842996371446475743E-1),
        (5, 2.12300514481811942347288949897E1),
        (6, 1.52792336328824235832596922938E1),
        (7, -3.32882109689848629194453265587E1),
        (8, -2.03312017085086261358222928593E-2),
    ],
    &[
        (0, -9.3714243008598732571704021658E-1),
        (3, 5.18637242884406370830023853209E0),
        (4, 1.09143734899672957818500254654E0),
        (5, -8.14978701074692612513997267357E0),
        (6, -1.85200656599969598641566180701E1),
        (7, 2.27394870993505042818970056734E1),
        (8, 2.49360555267965238987089396762E0),
        (9, -3.0467644718982195003823669022E0),
    ],
    &[
        (0, 2.27331014751653820792359768449E0),
        (3, -1.05344954667372501984066689879E1),
        (4, -2.00087205822486249909675718444E0),
        (5, -1.79589318631187989172765950534E1),
        (6, 2.79488845294199600508499808837E1),
        (7, -2.85899827713502369474065508674E0),
        (8, -8.87285693353062954433549289258E0),
        (9, 1.23605671757943030647266201528E1),
        (10, 6.43392746015763530355970484046E-1),
    ],
];

pub(super) const B: [(usize, f64); 8] = [
    (0, 5.42937341165687622380535766363E-2),
    (5, 4.45031289275240888144113950566E0),
    (6, 1.89151789931450038304281599044E0),
    (7, -5.8012039600105847814672114227E0),
    (8, 3.1116436695781989440891606237E-1),
    (9, -1.52160949662516078556178806805E-1),
    (10, 2.01365400804030348374776537501E-1),
    (11, 4.47106157277725905176885569043E-2),
];

pub(super) const ER: [(usize, f64); 8] = [
    (0, 0.1312004499419488073250102996E-01),
    (5, -0.1225156446376204440720569753E+01),
    (6, -0.4957589496572501915214079952E+00),
    (7, 0.1664377182454986536961530415E+01),
    (8, -0.3503288487499736816886487290E+00),
    (9, 0.3341791187130174790297318841E+00),
    (10, 0.8192320648511571246570742613E-01),
    (11, -0.2235530786388629525884427845E-01),
];

pub(super) const BHH: [(usize, f64); 3] = [
    (0, 0.244094488188976377952755905512E+00),
    (8, 0.733846688281611857341361741547E+00),
    (11, 0.220588235294117647058823529412E-01),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_sum_to_nodes() {
        for (row, c) in A.iter().zip(C) {
            let s: f64 = row.iter().map(|(_, a)| a).sum();
            assert!((s - c).abs() < 1e-14, "{s} vs {c}");
        }
    }

    #[test]
    fn weights_are_consistent() {
        let b: f64 = B.iter().map(|(_, b)| b).sum();
        assert!((b - 1.0).abs() < 1e-14);
        // both error estimators annihilate constants
        let er: f64 = ER.iter().map(|(_, e)| e).sum();
        assert!(er.abs() < 1e-14);
        let bhh: f64 = BHH.iter().map(|(_, e)| e).sum();
        assert!((bhh - 1.0).abs() < 1e-14);
        // eighth order implies Σ b_i c_i^k = 1/(k + 1) for k < 8
        for k in 1..8 {
            let s: f64 = B.iter().map(|&(i, b)| b * C[i].powi(k)).sum();
            assert!((s - 1.0 / (k + 1) as f64).abs() < 1e-13, "k = {k}");
        }
    }
}
