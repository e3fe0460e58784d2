#pragma once

#include <string>

#include <json.hpp>

#include "catgeo/allocate.hpp"
#include "catgeo/categories.hpp"
#include "catgeo/catfisher.hpp"
#include "catgeo/infomeasure.hpp"
#include "catgeo/nettrain.hpp"
#include "catgeo/neurocode.hpp"

namespace catgeo {

using Json = nlohmann::json;

// 17 significant digits: lossless round-trip of doubles.
std::string format_double(double v);

// FNV-1a 64-bit over a canonical string; stable across builds.
uint64_t fnv1a(const std::string& s);
std::string digest_hex(const std::string& s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

Json model_to_json(const CategoryModel& model);
CategoryModel model_from_json(const Json& j);

Json code_to_json(const PopulationCode& code);
PopulationCode code_from_json(const Json& j);

Json net_to_json(const MLPModel& net);
MLPModel net_from_json(const Json& j);

// Dataset CSV with header x_1..x_K,y.
void write_samples_csv(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> read_samples_csv(const std::string& path);

// PDC export: arc_length,x_1..x_K,L,f_cat.
void write_pdc_csv(const std::string& path, const CategoryModel& model,
                   const Polyline& pdc);

// Fisher field export: x_1..x_K,F_11..F_KK (row-major),lambda_1..lambda_K.
void write_fisher_field_csv(const std::string& path, const std::vector<Vec>& nodes,
                            const std::vector<FisherMatrix>& fields);

// Allocation profiles: x,p,fcat,fcode,branch_id.
void write_allocation_csv(const std::string& path, const AllocationProblem& problem,
                          const AllocationResult& result);

Json mi_result_to_json(const MIResult& r, const std::string& config_digest);

}  // namespace catgeo
