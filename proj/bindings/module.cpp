#include <pybind11/pybind11.h>
PYBIND11_MODULE(_riskmin, m) { m.doc() = "placeholder"; }
