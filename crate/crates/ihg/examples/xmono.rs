use ihg::atlas::EvaluationPoint;
use ihg::connection::{monodromy_loop_path, monodromy_rhs, MonodromyLoop};
use ihg::quad::continue_along_path;
use ihg::series::Parameters;
use std::time::Instant;

fn main() {
    let p = Parameters::from_reals(0.37, -0.21, 0.13, 0.8, 1.5).unwrap();
    let x = EvaluationPoint::from_reals(5.0, 1.0, 10.0, 1.0);
    for lp in [MonodromyLoop::GammaB, MonodromyLoop::GammaA] {
        let t0 = Instant::now();
        let path = monodromy_loop_path(lp, &p, &x);
        match continue_along_path(&p, &path, 1e-10) {
            Ok(lhs) => {
                let (_, rhs) = monodromy_rhs(lp, &p, &x, 1e-12).unwrap();
                println!("{lp}: rel = {:.3e}  ({:.2?})", (lhs - rhs).norm() / rhs.norm(), t0.elapsed());
            }
            Err(e) => println!("{lp}: ERROR {e}  ({:.2?})", t0.elapsed()),
        }
    }
}
