// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace nlosloc {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define NLOSLOC_ERROR(Name)                                                    \
  class Name : public Error {                                                  \
  public:                                                                      \
    using Error::Error;                                                        \
  }

// geometry
NLOSLOC_ERROR(TxInsideBuilding);
NLOSLOC_ERROR(RxInsideBuilding);
NLOSLOC_ERROR(OutOfBounds);
NLOSLOC_ERROR(BadShape);
NLOSLOC_ERROR(InvalidEnvironment);

// propagation
NLOSLOC_ERROR(InvalidGeometry);
NLOSLOC_ERROR(NotPSD);
NLOSLOC_ERROR(NonFiniteInput);
NLOSLOC_ERROR(EmptyCandidates);

// sampling
NLOSLOC_ERROR(BudgetTooLarge);
NLOSLOC_ERROR(EmptyMeasurements);
NLOSLOC_ERROR(MaskOutsideMap);
NLOSLOC_ERROR(NotNormalized);
NLOSLOC_ERROR(AlreadyNormalized);

// diffusion
NLOSLOC_ERROR(BadTimestep);
NLOSLOC_ERROR(ShapeMismatch);
NLOSLOC_ERROR(SingularSystem);
NLOSLOC_ERROR(ModelFormatError);

// localization
NLOSLOC_ERROR(EmptyRegion);
NLOSLOC_ERROR(KTooLarge);
NLOSLOC_ERROR(TooFewMeasurements);
NLOSLOC_ERROR(DegenerateGeometry);

// metrics
NLOSLOC_ERROR(ZeroEnergyTruth);
NLOSLOC_ERROR(MapTooSmallForWindow);

// dataio
NLOSLOC_ERROR(FileNotFound);
NLOSLOC_ERROR(BadDimensions);
NLOSLOC_ERROR(UnreadableImage);
NLOSLOC_ERROR(PlacementFailure);

// cli / pipeline
NLOSLOC_ERROR(ConfigInvalid);
NLOSLOC_ERROR(UpstreamArtifactMissing);
NLOSLOC_ERROR(WriteFailure);

#undef NLOSLOC_ERROR

} // namespace nlosloc
