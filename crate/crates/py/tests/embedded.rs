use pyo3::ffi::c_str;
use pyo3::prelude::*;

use abelkern::abelkern;

#[test]
fn module_runs_in_an_embedded_interpreter() {
    pyo3::append_to_inittab!(abelkern);
    Python::initialize();
    Python::attach(|py| {
        py.run(
            c_str!(
                r#"
import abelkern
g = abelkern.Grid(3, 1.0)
c = abelkern.Coefficients.constant(1.0, 0.0, 0.5, 0.0)
ft = abelkern.joint_kernel(g, c, 0.2, abelkern.Frequencies.window(2.0, 5))
assert len(ft) == 5 and ft.hermitian_defect() < 1e-12
row = ft.slice(0j)[0]
assert abs(sum(row) * g.step - 1.0) < 1e-12
try:
    abelkern.Grid(3, -1.0)
except ValueError:
    pass
else:
    raise AssertionError("negative half width accepted")
"#
            ),
            None,
            None,
        )
        .unwrap();
    });
}
