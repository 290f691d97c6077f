#pragma once

#include <string>

namespace tfln {

/// The bundled iris CSV (150 rows), identical to data/iris.csv.
const std::string& embedded_iris_csv();

}  // namespace tfln
