import java.io.PrintWriter;
import java.nio.charset.StandardCharsets;
import java.io.StringWriter;
import org.junit.runner.Description;
import org.junit.runner.JUnitCore;
import org.junit.runner.Request;
import org.junit.runner.Result;
import org.junit.runner.notification.Failure;

/** Runs Class#method arguments in the given order inside one JVM (JUnit 4). */
public class FlakemendOrderedRun4 {
    public static void main(String[] args) throws Exception {
        try (PrintWriter out = new PrintWriter(args[0], StandardCharsets.UTF_8.name())) {
            JUnitCore core = new JUnitCore();
            for (int i = 1; i < args.length; i++) {
                String id = args[i];
                int hash = id.indexOf('#');
                Class<?> cls;
                try {
                    cls = Class.forName(id.substring(0, hash));
                } catch (ClassNotFoundException e) {
                    out.println(id + "\tNOT_FOUND\t\t\t0");
                    continue;
                }
                Request request = Request.method(cls, id.substring(hash + 1));
                long start = System.nanoTime();
                Result result = core.run(request);
                long millis = (System.nanoTime() - start) / 1000000L;
                if (result.getRunCount() == 0 && result.getFailureCount() == 0) {
                    out.println(id + "\tNOT_FOUND\t\t\t" + millis);
                    continue;
                }
                if (result.wasSuccessful()) {
                    out.println(id + "\tPASS\t\t\t" + millis);
                    continue;
                }
                Failure failure = result.getFailures().get(0);
                Description d = failure.getDescription();
                if (d.getMethodName() == null && String.valueOf(failure.getMessage()).contains("No tests found")) {
                    out.println(id + "\tNOT_FOUND\t\t\t" + millis);
                    continue;
                }
                StringWriter trace = new StringWriter();
                failure.getException().printStackTrace(new PrintWriter(trace));
                out.println(id + "\tFAIL\t" + esc(String.valueOf(failure.getMessage())) + "\t" + esc(trace.toString())
                        + "\t" + millis);
            }
        }
        System.exit(0);
    }

    private static String esc(String s) {
        return s.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r");
    }
}
