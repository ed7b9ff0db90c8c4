#include "core/emissions.hpp"

#include <algorithm>
#include <sstream>

#include "core/error.hpp"
#include "core/numbers.hpp"

namespace bundlesim::emissions {

double evaluate(const Coefficients& c, double v, double a) noexcept {
    const double va = v * a;
    const double raw = c[0] + c[1] * va + c[2] * va * a + c[3] * v + c[4] * v * v + c[5] * v * v * v;
    return std::max(0.0, raw);
}

Registry::Registry(std::vector<EmissionClass> classes) : classes_(std::move(classes)) {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (!index_.emplace(classes_[i].name, i).second) throw Error(ErrorCode::DuplicateClass, classes_[i].name);
    }
}

bool Registry::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

const EmissionClass& Registry::get(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error(ErrorCode::UnknownClass, std::string(name));
    return classes_[it->second];
}

double emission_rate(const Registry& registry, std::string_view class_name, std::string_view quantity, double v,
                     double a) {
    const auto& cls = registry.get(class_name);
    auto it = cls.quantities.find(quantity);
    if (it == cls.quantities.end()) throw Error(ErrorCode::UnknownQuantity, std::string(quantity));
    return evaluate(it->second, v, a);
}

Registry load_emission_classes(std::string_view config) {
    std::vector<EmissionClass> classes;
    std::istringstream in{std::string(config)};
    std::string line;
    int line_no = 0;
    auto fail = [&](ErrorCode code, const std::string& subject, const std::string& what) {
        throw Error(code, subject, "line " + std::to_string(line_no) + ": " + what);
    };
    auto finish_class = [&] {
        if (classes.empty()) return;
        const auto& cls = classes.back();
        for (auto q : {kCo2, kFuel}) {
            if (!cls.quantities.contains(q)) {
                throw Error(ErrorCode::MissingCoefficient, cls.name, "no " + std::string(q) + " coefficients");
            }
        }
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::vector<std::string> tok;
        for (std::string t; fields >> t;) tok.push_back(t);
        if (tok.empty()) continue;

        if (tok[0] == "class") {
            if (tok.size() != 2) fail(ErrorCode::MalformedConfig, "class", "expected 'class <name>'");
            finish_class();
            for (const auto& c : classes) {
                if (c.name == tok[1]) fail(ErrorCode::DuplicateClass, tok[1], "class defined twice");
            }
            classes.push_back(EmissionClass{tok[1], {}});
            continue;
        }
        if (classes.empty()) fail(ErrorCode::MalformedConfig, tok[0], "coefficients before any 'class' line");
        auto& cls = classes.back();
        if (tok.size() < 7) fail(ErrorCode::MissingCoefficient, cls.name, tok[0] + " needs 6 coefficients");
        if (tok.size() > 7) fail(ErrorCode::MalformedConfig, cls.name, tok[0] + " has more than 6 coefficients");
        Coefficients c{};
        for (std::size_t i = 0; i < c.size(); ++i) {
            auto v = parse_number(tok[i + 1]);
            if (!v) fail(ErrorCode::MalformedConfig, cls.name, "bad coefficient '" + tok[i + 1] + "'");
            c[i] = *v;
        }
        if (!cls.quantities.emplace(tok[0], c).second) {
            fail(ErrorCode::MalformedConfig, cls.name, tok[0] + " given twice");
        }
    }
    finish_class();
    return Registry(std::move(classes));
}

CumulativeAccount account_step(CumulativeAccount account, const EmissionSample& sample, double dt) noexcept {
    account.co2_total += sample.co2_rate * dt;
    account.fuel_total += sample.fuel_rate * dt;
    account.duration += dt;
    return account;
}

}  // namespace bundlesim::emissions
