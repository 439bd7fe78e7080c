#include <assert.h>
#include <math.h>
#include <stdio.h>
#include "camber.h"

int main(void) {
    printf("camber version: %s\n", camber_version());

    CamberMesh *mesh = NULL;
    assert(camber_mesh_builtin("cube", 0.1, &mesh) == CAMBER_STATUS_OK);
    CamberPoints *pts = NULL;
    assert(camber_points_sample(mesh, 80, 7, &pts) == CAMBER_STATUS_OK);
    assert(camber_points_len(pts) == 80);

    double state[13] = {1,0,0, 0,1,0, 0,0,1, 0,0,2.0, 600.0};
    double target[13] = {1,0,0, 0,1,0, 0,0,1, 0.03,-0.02,1.5, 450.0};
    double delta[10];
    assert(camber_ideal_update(state, target, delta) == CAMBER_STATUS_OK);
    double reached[13];
    assert(camber_apply_update(state, delta, reached) == CAMBER_STATUS_OK);
    for (int i = 0; i < 13; i++) {
        assert(fabs(reached[i] - target[i]) < 1e-9);
    }

    double breakdown[4];
    assert(camber_total_loss(state, delta, target, pts, 320.0, 240.0, 0.01, 1.0, breakdown)
           == CAMBER_STATUS_OK);
    assert(breakdown[3] < 1e-12);

    double uv[2];
    double p[3] = {0.1, -0.2, 0.0};
    assert(camber_project_point(state, 320.0, 240.0, p, uv) == CAMBER_STATUS_OK);
    assert(fabs(uv[0] - 350.0) < 1e-9 && fabs(uv[1] - 180.0) < 1e-9);

    double gt_box[4] = {305.0, 225.0, 335.0, 255.0};
    double records[7 * 6];
    assert(camber_refine(state, target, gt_box, pts, 640.0, 480.0,
                         CAMBER_PREDICTOR_DAMPED, 0.5, 11, NULL, 6, records)
           == CAMBER_STATUS_OK);
    assert(records[0 * 6 + 3] > records[6 * 6 + 3]);  /* focal error decays */

    camber_points_free(pts);
    camber_mesh_free(mesh);
    printf("C ABI check passed\n");
    return 0;
}
