#include "xfer/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace xfer {

using detail::json;

std::string model_to_json(const StateSpaceModel& model) {
    json j;
    j["A"] = detail::matrix_to_json(model.A());
    j["B"] = detail::matrix_to_json(model.B());
    j["C"] = detail::matrix_to_json(model.C());
    j["dt"] = model.dt();
    j["input_labels"] = model.input_labels();
    j["output_labels"] = model.output_labels();
    return j.dump(2);
}

StateSpaceModel model_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("model_from_json: ") + e.what());
    }
    for (const char* key : {"A", "B", "C", "dt"})
        if (!j.contains(key)) throw InvalidArgument(std::string("model_from_json: missing key ") + key);
    if (!j["dt"].is_number()) throw InvalidArgument("model_from_json: dt must be a number");
    std::vector<std::string> in, out;
    if (j.contains("input_labels")) in = j["input_labels"].get<std::vector<std::string>>();
    if (j.contains("output_labels")) out = j["output_labels"].get<std::vector<std::string>>();
    return StateSpaceModel(detail::matrix_from_json<InvalidArgument>(j["A"], "A"),
                           detail::matrix_from_json<InvalidArgument>(j["B"], "B"),
                           detail::matrix_from_json<InvalidArgument>(j["C"], "C"),
                           j["dt"].get<double>(), std::move(in), std::move(out));
}

void save_model(const StateSpaceModel& model, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidArgument("save_model: cannot open " + path.string());
    os << model_to_json(model) << '\n';
}

StateSpaceModel load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidArgument("load_model: cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace xfer
