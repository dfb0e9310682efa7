#include <doctest.h>

#include <cmath>
#include <initializer_list>

#include "edl/special.hpp"

// Reference values computed with mpmath at 30 significant digits.
namespace {

struct Ref {
    double x;
    double value;
};

constexpr Ref kLgamma[] = {
    {0.05, 2.968879201051730825},
    {0.1, 2.25271265173420596},
    {0.31, 1.061372777029105146},
    {0.5, 0.5723649429247000871},
    {0.77, 0.1820651686605370724},
    {1.0, 0.0},
    {1.5, -0.1207822376352452223},
    {2.0, 0.0},
    {2.5, 0.2846828704729191596},
    {3.7, 1.428072326665387922},
    {5.0, 3.17805383034794562},
    {6.283185307179586, 5.277788665919055179},
    {10.0, 12.80182748008146961},
    {25.5, 56.38916764371994674},
    {123.456, 469.6055471299294687},
    {1000.0, 5905.220423209181212},
};

constexpr Ref kDigamma[] = {
    {0.05, -20.49784499129987037},
    {0.1, -10.4237549404110768},
    {0.31, -3.383714331949045099},
    {0.5, -1.963510026021423479},
    {0.77, -1.036058130098535908},
    {1.0, -0.5772156649015328606},
    {1.5, 0.03648997397857652056},
    {2.0, 0.4227843350984671394},
    {2.5, 0.7031566406452431872},
    {3.7, 1.167153539361511386},
    {5.0, 1.506117668431800473},
    {6.283185307179586, 1.756194020883884335},
    {10.0, 2.251752589066721108},
    {25.5, 3.218942472883919767},
    {123.456, 4.811829323828985387},
    {1000.0, 6.907255195648812052},
};

constexpr Ref kTrigamma[] = {
    {0.05, 401.5323573421151193},
    {0.1, 101.4332991507927588},
    {0.31, 11.52821498073919978},
    {0.5, 4.934802200544679309},
    {0.77, 2.439646963509367201},
    {1.0, 1.644934066848226436},
    {1.5, 0.9348022005446793094},
    {2.0, 0.6449340668482264365},
    {2.5, 0.490357756100234865},
    {3.7, 0.3100378576700383191},
    {5.0, 0.2213229557371153254},
    {6.283185307179586, 0.1724886536135869046},
    {10.0, 0.1051663356816857461},
    {25.5, 0.03999466964956292404},
    {123.456, 0.00813294583427819801},
    {1000.0, 0.001000500166666633333},
};

double err(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace

TEST_CASE("lgamma matches high-precision references to 1e-10") {
    for (const auto& ref : kLgamma) {
        CAPTURE(ref.x);
        CHECK(err(edl::special::lgamma(ref.x), ref.value) < 1e-10);
    }
}

TEST_CASE("digamma matches high-precision references to 1e-10") {
    for (const auto& ref : kDigamma) {
        CAPTURE(ref.x);
        CHECK(err(edl::special::digamma(ref.x), ref.value) < 1e-10);
    }
}

TEST_CASE("trigamma matches high-precision references to 1e-10") {
    for (const auto& ref : kTrigamma) {
        CAPTURE(ref.x);
        CHECK(err(edl::special::trigamma(ref.x), ref.value) < 1e-10);
    }
}

TEST_CASE("special functions reject the non-positive axis") {
    CHECK(std::isnan(edl::special::lgamma(0.0)));
    CHECK(std::isnan(edl::special::digamma(-1.0)));
    CHECK(std::isnan(edl::special::trigamma(0.0)));
}

TEST_CASE("recurrence consistency") {
    // psi(x+1) = psi(x) + 1/x across the shift threshold
    for (double x : {0.3, 1.7, 5.5, 9.9, 11.4}) {
        CHECK(edl::special::digamma(x + 1.0) ==
              doctest::Approx(edl::special::digamma(x) + 1.0 / x).epsilon(1e-12));
        CHECK(edl::special::trigamma(x + 1.0) ==
              doctest::Approx(edl::special::trigamma(x) - 1.0 / (x * x)).epsilon(1e-12));
    }
}
