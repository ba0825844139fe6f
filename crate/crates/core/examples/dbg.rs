use oscamp_core::lopatinski;
use oscamp_core::presets::{self, PresetName};

fn main() {
    let ps = presets::build(PresetName::Resonant).unwrap();
    println!("beta_l: {:?}", ps.beta_l);
    println!("bnd: {:?}", ps.spec.bnd);
    let report = lopatinski::scan_upsilon0(&ps.spec, 1440).unwrap();
    for r in &report.roots {
        let th = r.beta.eta.atan2(r.beta.sigma);
        println!("root at theta = {th:.8} residual {:.2e} simple {} dtau {:.3}", r.residual, r.simple_zero, r.dtau_abs);
    }
}
