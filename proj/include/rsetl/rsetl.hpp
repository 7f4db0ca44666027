// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "rsetl/bytes.hpp"
#include "rsetl/columnar.hpp"
#include "rsetl/columns.hpp"
#include "rsetl/datagen.hpp"
#include "rsetl/error.hpp"
#include "rsetl/hash.hpp"
#include "rsetl/network.hpp"
#include "rsetl/pipeline.hpp"
#include "rsetl/provision.hpp"
#include "rsetl/queue.hpp"
#include "rsetl/report.hpp"
#include "rsetl/schema.hpp"
#include "rsetl/sysmodel.hpp"
#include "rsetl/trainer.hpp"
#include "rsetl/transforms.hpp"
