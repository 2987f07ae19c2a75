#ifndef BATTROM_MATERIALS_HPP
#define BATTROM_MATERIALS_HPP

#include "battrom/errors.hpp"
#include "battrom/grid.hpp"

namespace battrom {

/// Material and physical constants of the cell model. Defaults are the
/// published values for this chemistry; the collector conductivities
/// are free parameters of the artifact (metallic, any large value).
///
/// Units: cm, s, mol, A, V, K throughout.
struct MaterialData {
    double D_e = 1.622e-6;       // electrolyte interdiffusion, cm^2/s
    double D_s_neg = 1e-10;      // ion diffusion in neg. electrode, cm^2/s
    double D_s_pos = 1e-10;      // ion diffusion in pos. electrode, cm^2/s
    double sigma_neg = 10.0;     // electronic conductivity, S/cm
    double sigma_pos = 0.38;
    double sigma_cc_neg = 10.0;  // collector conductivity, S/cm
    double sigma_cc_pos = 10.0;
    double kappa = 0.02;         // ion conductivity, S/cm
    double c_max_neg = 24681e-6; // mol/cm^3
    double c_max_pos = 23671e-6;
    double k_neg = 0.002;        // reaction rate, A cm^2.5 / mol^1.5
    double k_pos = 0.2;
    double c0_elyte = 1200e-6;   // initial concentrations, mol/cm^3
    double c0_neg = 2639e-6;
    double c0_pos = 20574e-6;
    double t_plus = 0.39989;     // transference number
    double T_temp = 298.0;       // temperature, K (distinct from the final time)
    double F = 96487.0;          // Faraday constant, As/mol
    double R_gas = 8.314;        // gas constant, J/(mol K)

    void validate() const;

    double c_max(bool pos_side) const { return pos_side ? c_max_pos : c_max_neg; }
    double reaction_rate(bool pos_side) const { return pos_side ? k_pos : k_neg; }
    double thermal_voltage_inv() const { return F / (2.0 * R_gas * T_temp); }

    /// kappa * (1 - t_plus) * R * T / F, the coefficient of the 1/c flux.
    double inv_c_coefficient() const { return kappa * (1.0 - t_plus) * R_gas * T_temp / F; }

    double initial_concentration(CellLabel l) const;
    double diffusion(CellLabel l) const;
    double conductivity(CellLabel l) const;
};

/// Open-circuit potential of the negative electrode at state of charge s.
double u0_neg(double s);
double u0_neg_deriv(double s);

/// Open-circuit potential of the positive electrode. Defined for
/// s < 1.00167 (pole of the power-law term); throws DomainError beyond.
double u0_pos(double s);
double u0_pos_deriv(double s);

inline double u0(bool pos_side, double s) { return pos_side ? u0_pos(s) : u0_neg(s); }
inline double u0_deriv(bool pos_side, double s) {
    return pos_side ? u0_pos_deriv(s) : u0_neg_deriv(s);
}

} // namespace battrom

#endif
