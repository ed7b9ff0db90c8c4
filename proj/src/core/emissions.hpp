#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace bundlesim::emissions {

/// Polynomial coefficients c0..c5 of
///   rate = max(0, c0 + c1*v*a + c2*v*a^2 + c3*v + c4*v^2 + c5*v^3)
using Coefficients = std::array<double, 6>;

inline constexpr std::string_view kCo2 = "co2";    // mg/s
inline constexpr std::string_view kFuel = "fuel";  // ml/s

struct EmissionClass {
    std::string name;
    std::map<std::string, Coefficients, std::less<>> quantities;

    bool operator==(const EmissionClass&) const = default;
};

double evaluate(const Coefficients& c, double v, double a) noexcept;

/// Immutable lookup of emission classes by name.
class Registry {
public:
    Registry() = default;
    explicit Registry(std::vector<EmissionClass> classes);

    bool contains(std::string_view name) const;
    const EmissionClass& get(std::string_view name) const;
    const std::vector<EmissionClass>& classes() const noexcept { return classes_; }

private:
    std::vector<EmissionClass> classes_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// Throws UnknownClass / UnknownQuantity.
double emission_rate(const Registry& registry, std::string_view class_name, std::string_view quantity, double v,
                     double a);

/// Parses the line-oriented class config. Every class must define co2 and fuel.
Registry load_emission_classes(std::string_view config);

struct EmissionSample {
    std::string vehicle;
    double t = 0.0;
    double co2_rate = 0.0;   // mg/s
    double fuel_rate = 0.0;  // ml/s
};

/// Accumulated mass/volume and active time, kept in mg and ml.
struct CumulativeAccount {
    double co2_total = 0.0;  // mg
    double fuel_total = 0.0; // ml
    double duration = 0.0;   // s

    bool operator==(const CumulativeAccount&) const = default;
};

CumulativeAccount account_step(CumulativeAccount account, const EmissionSample& sample, double dt) noexcept;

}  // namespace bundlesim::emissions
