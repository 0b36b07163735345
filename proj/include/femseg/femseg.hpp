#pragma once

#include "femseg/augment.hpp"
#include "femseg/io/nifti.hpp"
#include "femseg/io/pnm.hpp"
#include "femseg/metrics.hpp"
#include "femseg/nn/checkpoint.hpp"
#include "femseg/patching.hpp"
#include "femseg/phantom.hpp"
#include "femseg/postprocess.hpp"
#include "femseg/predict.hpp"
#include "femseg/preprocess.hpp"
#include "femseg/train.hpp"
