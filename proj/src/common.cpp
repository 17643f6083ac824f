#include "covisac/common.hpp"

namespace covisac {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidGeometry: return "InvalidGeometry";
        case ErrorCode::InvalidStats: return "InvalidStats";
        case ErrorCode::InvalidFilter: return "InvalidFilter";
        case ErrorCode::SingularDenominator: return "SingularDenominator";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::BracketError: return "BracketError";
        case ErrorCode::ZeroMatrix: return "ZeroMatrix";
        case ErrorCode::InfeasibleDesign: return "InfeasibleDesign";
        case ErrorCode::SensingInfeasible: return "SensingInfeasible";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::DegenerateTest: return "DegenerateTest";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace covisac
