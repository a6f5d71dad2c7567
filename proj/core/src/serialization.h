#pragma once

// JSON conversions shared between translation units. Not installed.

#include "clustercal/calibrators.h"
#include "clustercal/clustering.h"
#include "json_util.h"

namespace clustercal::detail {

OrderedJson calibrator_json(const Calibrator& calibrator);
Calibrator calibrator_from_json(const Json& j);

OrderedJson cluster_model_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const Json& j);

OrderedJson matrix_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const char* what);

}  // namespace clustercal::detail
