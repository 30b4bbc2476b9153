use qaclab::filters::*;
use qaclab::grid::Grid;

fn main() {
    let tg = Grid::default_time();
    let wg = Grid::default_freq();
    // gaussian lowpass q=16
    let g16 = make_gaussian_lowpass(16.0, &tg, &wg).unwrap();
    println!("f_16(0) = {:?}", g16.kernel_at(0.0));
    let mut m = 0.0f64;
    let mut w = 1.0;
    while w <= 10.0 { m = m.max(g16.response(w).norm()); w += 0.001; }
    println!("max |f~_16| on [1,10] = {:.6e}  => fitted C = {:.4}", m, -m.ln()/16.0);
    println!("f~_16(0) = {:.12}", g16.response(0.0).re);
    println!("g16 decay fit: {:?}", g16.decay_class);
    println!("g16 quad bound = {:.3e}", g16.quad_bound);

    // q=400 indicator
    let tg400 = Grid::new(300.0, 0.01).unwrap();
    let g400 = make_gaussian_lowpass(400.0, &tg400, &wg).unwrap();
    for &w in &[0.0, 0.3, 0.55, 0.6, 0.74, 0.76, 0.9, 0.95, 1.0] {
        println!("q=400 resp({w}) = {:.6e}", g400.response(w).re);
    }

    // exact lowpass
    for k in [4usize, 12, 24, 32] {
        match make_exact_lowpass(DecayFamily::LogSquared, k, &tg, &wg) {
            Ok(ex) => {
                println!("K={k}: G~(0)-1 = {:.3e}, G~(0.5)-1 = {:.3e}, G~(1) = {:.3e}, G~(1.5) = {:.3e}, quad={:.2e}, fit={:?}",
                    ex.response(0.0).re - 1.0, ex.response(0.5).re - 1.0, ex.response(1.0).re, ex.response(1.5).re,
                    ex.quad_bound, ex.decay_class);
                let integral: f64 = ex.time_kernel.iter().map(|v| v.re).sum::<f64>() * tg.step;
                println!("   Int F_low dt = {:.9}", integral);
            }
            Err(e) => println!("K={k}: {e}"),
        }
    }

    // subexp qac from K=24
    let ex = make_exact_lowpass(DecayFamily::LogSquared, 24, &tg, &wg).unwrap();
    let f = make_qac_kernel(&ex).unwrap();
    println!("F~(2) = {:.9}", f.response(2.0).re);
    println!("F~(0) = {:.3e}", f.response(0.0).norm());
    let mut sup = 0.0f64;
    let mut w = 1.0;
    while w <= 10.0 { sup = sup.max((f.response(w).re + 1.0/w).abs()); w += 0.001; }
    println!("sup |F~+1/w| on [1,10] = {:.3e}", sup);
    println!("F(0.5) = {:?}, F(-0.5) = {:?}", f.kernel_at(0.5), f.kernel_at(-0.5));
    println!("subexp decay fit: {:?}", f.decay_class);
    // decay values at samples for criterion-2-like fit over [10,1000]
    let mut pts = vec![];
    let mut t = 10.0;
    while t <= 1000.0 { pts.push((t, f.kernel_at(t).norm())); t *= 1.3; }
    for (t, v) in &pts { println!("  |F({t:.0})| = {v:.3e}  envelope exp(-t/ln^2(2+t)) = {:.3e}", (-t/ (2.0+t).ln().powi(2)).exp()); }

    // gaussian qac
    let tga = Grid::new(200.0, 0.01).unwrap();
    let fq = make_gaussian_qac(4.0, &tga, &wg).unwrap();
    println!("gqac F(0+) = {:?}", fq.kernel_at(1e-9));
    let mut sup = 0.0f64;
    let mut w = 1.0;
    while w <= 10.0 { sup = sup.max((fq.response(w).re + 1.0/w).abs()); w += 0.001; }
    println!("gqac alpha=4 sup|F~+1/w| = {:.4e} vs exp(-a^2/2) = {:.4e}", sup, (-8.0f64).exp());

    // aux kernels at q=400
    let sp = make_aux_kernel(AuxKind::StepPlus{q: 400.0, gamma: 2.0, eps: 1e-6}, &tg, &wg).unwrap();
    println!("step+ resp(+1) = {:.4}, resp(-1) = {:.4}, resp(0)={:.4}", sp.response(1.0).re, sp.response(-1.0).re, sp.response(0.0).re);
    println!("step+ resp(+1).im = {:.2e}", sp.response(1.0).im);
    let bd = make_aux_kernel(AuxKind::BandD{q1: 400.0, gamma: 1.5, lambda_min: 1.0}, &tg, &wg).unwrap();
    println!("band-d d(0) = {:?} (2 gamma = 3)", bd.kernel_at(0.0));
    for &w in &[-1.0, -0.2, 0.5, 1.5, 2.5, 3.2, 4.0] {
        println!("band-d resp({w}) = {:.4} + {:.1e}i", bd.response(w).re, bd.response(w).im);
    }

    // composite exact
    let c = composite_response(&f, &ex, 0.2, 0.25, &wg, 0.2).unwrap();
    println!("composite exact residual_sup = {:.3e}", c.residual_sup);
    // composite gaussian
    let g = make_gaussian_lowpass(16.0, &tg, &wg).unwrap();
    let fg = make_gaussian_qac(4.0, &tga, &wg).unwrap();
    for (al, qq) in [(2.0,4.0),(2.0,16.0),(4.0,16.0),(8.0,16.0)] {
        let fgx = make_gaussian_qac(al, &tga, &wg).unwrap();
        let gx = make_gaussian_lowpass(qq, &tg, &wg).unwrap();
        let c = composite_response(&fgx, &gx, 0.2, 1.0, &wg, 0.2).unwrap();
        println!("gauss composite alpha={al} q={qq}: residual_sup = {:.4e}", c.residual_sup);
    }
    let _ = (g, fg);
    // decay class increments
    for fam in DecayFamily::ladder() {
        let incs = DecayClass::partial_integral_increments(fam, 6);
        println!("{:?} per-decade increments: {:?}", fam, incs.iter().map(|x| (x*1000.0).round()/1000.0).collect::<Vec<_>>());
    }
}
