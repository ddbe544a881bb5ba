#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "varhardy/bmo.hpp"
#include "varhardy/hardy.hpp"
#include "varhardy/martingale.hpp"
#include "varhardy/space.hpp"

namespace varhardy {

using Json = nlohmann::json;

Json space_to_json(const FilteredSpace& space);
FilteredSpace space_from_json(const Json& j);

/// Infinite entries are written as the string "inf".
Json exponent_to_json(const Exponent& p);
Exponent exponent_from_json(const Json& j);

Json vector_to_json(const RandomVariable& f);
/// Accepts { "values": [...] } or a bare array.
RandomVariable vector_from_json(const Json& j);

/// Full per-level form { "levels": [[...], ...] }.
Json martingale_to_json(const Martingale& f);
/// Accepts { "terminal": [...] } (levels by conditioning) or { "levels": ... }.
Martingale martingale_from_json(const Json& j, std::shared_ptr<const FilteredSpace> space);

Json stopping_time_to_json(const StoppingTime& tau);
StoppingTime stopping_time_from_json(const Json& j, const FilteredSpace& space);

Json decomposition_to_json(const AtomicDecomposition& dec);
AtomicDecomposition decomposition_from_json(const Json& j);

Json sup_result_to_json(const SupNormResult& r);

const char* mode_name(SupMode mode);

/// Parses a file; throws ValidationError on I/O or syntax errors.
Json read_json_file(const std::string& path);

/// 12 significant digits.
std::string csv_number(double x);

}  // namespace varhardy
