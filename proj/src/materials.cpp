#include "battrom/materials.hpp"

#include <cmath>

namespace battrom {

void MaterialData::validate() const {
    const double vals[] = {D_e,       D_s_neg,  D_s_pos, sigma_neg, sigma_pos, sigma_cc_neg,
                           sigma_cc_pos, kappa, c_max_neg, c_max_pos, k_neg,   k_pos,
                           c0_elyte,  c0_neg,   c0_pos,  T_temp,    F,         R_gas};
    for (double v : vals)
        if (!(v > 0.0)) throw DataError("material constant must be strictly positive");
    if (!(t_plus > 0.0 && t_plus < 1.0))
        throw DataError("transference number must lie in (0, 1)");
    if (!(c0_neg < c_max_neg && c0_pos < c_max_pos))
        throw DataError("initial electrode concentration must stay below c_max");
}

double MaterialData::initial_concentration(CellLabel l) const {
    switch (l) {
        case CellLabel::Electrolyte: return c0_elyte;
        case CellLabel::NegElectrode: return c0_neg;
        case CellLabel::PosElectrode: return c0_pos;
        default: return 0.0;  // no ions in the collectors
    }
}

double MaterialData::diffusion(CellLabel l) const {
    switch (l) {
        case CellLabel::Electrolyte: return D_e;
        case CellLabel::NegElectrode: return D_s_neg;
        case CellLabel::PosElectrode: return D_s_pos;
        default: return 0.0;
    }
}

double MaterialData::conductivity(CellLabel l) const {
    switch (l) {
        case CellLabel::Electrolyte: return kappa;
        case CellLabel::NegElectrode: return sigma_neg;
        case CellLabel::PosElectrode: return sigma_pos;
        case CellLabel::NegCollector: return sigma_cc_neg;
        case CellLabel::PosCollector: return sigma_cc_pos;
    }
    return 0.0;
}

double u0_neg(double s) { return -0.132 + 1.41 * std::exp(-3.52 * s); }

double u0_neg_deriv(double s) { return -3.52 * 1.41 * std::exp(-3.52 * s); }

namespace {
constexpr double kPosPole = 1.00167;
}

double u0_pos(double s) {
    if (s >= kPosPole)
        throw DomainError("u0_pos: state of charge at or beyond the pole s = 1.00167");
    return 0.0677504 * std::tanh(-21.8502 * s + 12.8268) -
           0.105734 * (std::pow(kPosPole - s, -0.379571) - 1.576) -
           0.045 * std::exp(-71.69 * std::pow(s, 8.0)) +
           0.01 * std::exp(-200.0 * (s - 0.19)) + 4.06279;
}

double u0_pos_deriv(double s) {
    if (s >= kPosPole)
        throw DomainError("u0_pos_deriv: state of charge at or beyond the pole s = 1.00167");
    const double th = std::tanh(-21.8502 * s + 12.8268);
    const double s7 = std::pow(s, 7.0);
    return 0.0677504 * (-21.8502) * (1.0 - th * th) -
           0.105734 * 0.379571 * std::pow(kPosPole - s, -1.379571) +
           0.045 * 71.69 * 8.0 * s7 * std::exp(-71.69 * s7 * s) -
           2.0 * std::exp(-200.0 * (s - 0.19));
}

} // namespace battrom
