#pragma once

#include <cmath>

namespace wpic {

// dBm <-> Watt, dB <-> linear power ratio.
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

inline double microjoule_to_joule(double uj) { return uj * 1e-6; }
inline double microwatt_to_watt(double uw) { return uw * 1e-6; }

}  // namespace wpic
