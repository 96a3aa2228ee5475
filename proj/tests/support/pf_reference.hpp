#pragma once

// Base-case power flow of the IEEE 30-bus case (case-file dispatch and
// voltage setpoints) computed once with an independent Newton solver and
// stored here. Angles in radians; generator outputs in MW/MVAr, in case order.

namespace facts::testing {

inline constexpr double kCase30Vm[30] = {
    1.0,            1.0,            0.983138289103, 0.98009299537,  0.982406196789, 0.973184021151,
    0.967355447704, 0.960623708294, 0.980506117058, 0.984404295793, 0.980506117058, 0.985468317013,
    1.0,            0.976676834063, 0.980229028914, 0.97739565517,  0.97686540989,  0.968440329094,
    0.965287039634, 0.969166350774, 0.993383296763, 1.0,            1.0,            0.988566296194,
    0.990214836901, 0.972194149801, 1.0,            0.974714899742, 0.979596704666, 0.967882879188};

inline constexpr double kCase30Va[30] = {
    0.0,             -0.007251681058, -0.026565201667, -0.031323906753, -0.032529842295, -0.039565858535,
    -0.046283282823, -0.047573651354, -0.052306350037, -0.058903744377, -0.052306350037, -0.02682416746,
    0.025763909035,  -0.040282817543, -0.040349139411, -0.046154991426, -0.059207488748, -0.060709318438,
    -0.069083704416, -0.067562120021, -0.060883949158, -0.059214292028, -0.027737259888, -0.045927666878,
    -0.029495870518, -0.037338631348, -0.014458993876, -0.039547915175, -0.037149301389, -0.053084600816};

inline constexpr double kCase30Pg[6] = {25.9738, 60.97, 21.59, 26.91, 19.2, 37.0};
inline constexpr double kCase30Qg[6] = {-0.99848, 31.99898, 39.56997, 10.54051, 7.95095, 11.35288};

}  // namespace facts::testing
